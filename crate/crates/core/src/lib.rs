pub mod adapters;
pub mod aggregate;
pub mod bench;
pub mod batch;
pub mod dictionary;
pub mod exec;
pub mod expr;
pub mod ntriples;
pub mod operator;
pub mod oracle;
pub mod plan;
pub mod planner;
pub mod profile;
pub mod query;
pub mod results;
pub mod row;
pub mod storage;
pub mod vector;
