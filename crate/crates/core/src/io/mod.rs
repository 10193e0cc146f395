//! Instance files, generators and datasets.

mod dataset;
mod generate;
mod lolib;

pub use dataset::{load_dataset, save_dataset, Dataset, GeneratorRecord, InstanceRecord, Manifest};
pub use generate::{gen_subsample, gen_uniform, generate, GeneratorKind, GeneratorSpec};
pub use lolib::{parse_lolib, read_lolib_file, write_lolib, write_lolib_file};
