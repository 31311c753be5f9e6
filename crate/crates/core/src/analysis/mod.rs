//! Explanatory analyses: what kinds of permutations does a model accept?

pub mod bleu;
mod buckets;
pub mod curves;
pub mod pos;

pub use bleu::{bleu, BleuConfig};
pub use buckets::{curve_csv, Buckets, CurvePoint};
pub use curves::{
    bleu_acceptance_curve, example_lengths, length_acceptance, length_csv, pair_bleu,
    signature_ratio_curve, LengthCurves, LengthPoint, RatioCurve,
};
pub use pos::{
    build_signature_table, minitree_overlap, signature_ratio, read_tagged, tagged_sentences, MinitreeScore,
    PosSignatureTable, TaggedRecord, TaggedSentence, Upos,
};
