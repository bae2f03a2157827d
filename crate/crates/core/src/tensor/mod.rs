//! Dense matrices, reverse-mode differentiation and the Adam optimizer.

mod dense;
pub mod gradcheck;
mod params;
mod tape;

pub use dense::Dense;
pub use gradcheck::{finite_diff_check, GradCheckReport, ParamCheck};
pub use params::{glorot_init, Adam, Parameters};
pub use tape::{cosine_similarity, Gradients, NodeId, Tape};
