//! Dataset ingestion, stratified splitting, augmentation and normalization.

mod augment;
mod dataset;
mod image;
mod norm;

pub use augment::{augment, eval_transform, hflip, resize_bilinear, rotate, vflip, AugmentConfig};
pub use dataset::{
    load_split, read_index_csv, scan_dataset, stratified_split, write_index_csv, DatasetIndex, Entry, LoadedSplit,
    ScanReport, Split, SplitRatios,
};
pub use image::{decode_image, ImageBuffer, RawImage, NNIM_MAGIC};
pub use norm::{compute_norm_stats, normalize, NormStats, STD_FLOOR};
