//! Synthetic multisets, TU graph datasets, diagram CSV files and k-fold plans.

pub mod folds;
pub mod pd_csv;
pub mod synthetic;
pub mod tu;

pub use folds::{kfold, FoldPlan};
pub use pd_csv::{read_pd_csv, read_synthetic, write_pd_csv, write_synthetic};
pub use synthetic::{gen_synthetic, strip_label, SyntheticSample, SyntheticSpec};
pub use tu::{load_tu, write_tu, TuDataset};
