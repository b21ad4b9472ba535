pub mod cost;
pub mod data;
pub mod labels;
pub mod report;
pub mod search;
pub mod space;
pub mod supernet;
