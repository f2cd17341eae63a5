pub mod adm;
pub mod broker;
pub mod channel;
pub mod client;
pub mod clock;
pub mod ddl;
pub mod error;
pub mod events;
pub mod feed;
pub mod island;
pub mod query;
pub mod scenario;
pub mod sink;
pub mod storage;
