//! Simulation, focusing and characterization of in-wall IR-UWB radar scans.
//!
//! The pipeline runs `scene` (forward model) -> `focusing` (range migration
//! or back-projection) -> `detect` (CA-CFAR, sequence extraction) ->
//! `polarimetry` (Fresnel model, spectral features), with `dataset` handling
//! persistence and training-set export.

pub mod dataset;
pub mod detect;
pub mod error;
pub mod fft;
pub mod focusing;
pub mod polarimetry;
pub mod scene;
pub mod waveform;

pub use dataset::{read_bscan, read_image, write_bscan, write_image, DatasetManifest, Record};
pub use detect::{cfar_detect, CfarConfig, Detection};
pub use error::{Error, FormatError, Result};
pub use focusing::{backproject, image_entropy, rma, FocusedImage, ImageGrid};
pub use polarimetry::{fresnel, EnvironmentLabel, FresnelPair, Material, PolSample};
pub use scene::{synthesize_bscan, BScan, Channel, ScanConfig, Scene, Target};
pub use waveform::WaveformConfig;
