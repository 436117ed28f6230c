// Index loops follow the recurrences term by term.
#![allow(clippy::needless_range_loop)]

pub mod calculus;
pub mod coupled;
pub mod domain;
pub mod error;
pub mod expr;
pub mod jet;
pub mod normal;
pub mod oracle;
pub mod output;
pub mod job;
pub mod script;
pub mod parse;
pub mod poly;
pub mod render;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use expr::{Assumptions, Expr, Func, Node, Sym};
pub use parse::parse_expr;
pub use render::{Form, FractionStyle, RenderSpec};
