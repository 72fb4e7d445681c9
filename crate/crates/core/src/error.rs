use thiserror::Error;

use crate::graph::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("node {0} is not present")]
    Absent(NodeId),
    #[error("node {0} is already present")]
    Duplicate(NodeId),
    #[error("node {0} is already soft-deleted")]
    AlreadyDeleted(NodeId),
    #[error("node {0} has no neighbors to sample")]
    NoNeighbors(NodeId),
    #[error("node id {0} exceeds the supported range")]
    IdOutOfRange(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("node {0} already has a rank")]
    RankAssigned(NodeId),
    #[error("node {0} has no rank")]
    MissingRank(NodeId),
    #[error("node {0} is not a pivot")]
    NotPivot(NodeId),
    #[error("node {0} was already processed")]
    AlreadyProcessed(NodeId),
    #[error("node {0} is already accounted for in this sketch")]
    AlreadyCounted(NodeId),
    #[error("node {0} does not belong to the cluster side it was added to")]
    MembershipMismatch(NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("node {0} appears in more than one block")]
    Overlap(NodeId),
    #[error("node {0} is not covered by the partition")]
    Uncovered(NodeId),
    #[error("node {0} is not part of the evaluated graph")]
    Foreign(NodeId),
}
