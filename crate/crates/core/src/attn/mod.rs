//! Conclusion-relevance pruning and construction strategies.

mod relevance;
mod strategy;

pub use relevance::{
    analyze, compute_levels, correlation, point_sign, relations, restrict, subgraph, subgraph_with, Level, LevelMap,
    PointRelevance, Relevance, DEFAULT_ALPHA,
};
pub use strategy::{apply_strategy, generate_strategies, Strategy, StrategyError, StrategyKind};
