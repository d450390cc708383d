//! N-gram overlap metrics, implemented from scratch: BLEU, ROUGE-L,
//! METEOR, and CIDEr, each scoring one candidate against a reference set.

mod bleu;
mod cider;
mod meteor;
mod rouge;

pub use bleu::{bleu, BleuParams, BleuScore};
pub use cider::{cider, compute_idf, CiderParams, IdfTable};
pub use meteor::{meteor, meteor_alignment, MatchStage, MeteorParams};
pub use rouge::{lcs_length, rouge_l, RougeParams};
