pub mod attn;
pub mod corpus;
pub mod deduction;
pub mod features;
pub mod geom;
pub mod problem;
pub mod scene;
pub mod scorer;
pub mod search;
