//! Keyword-spotting data toolkit.
//!
//! Continuous-speech synthesis from isolated keywords, an MFCC frontend,
//! spectrogram and noise augmentation, model-driven cleaning of noisy
//! recordings, a compound scaling search and a compact EfficientNet-style
//! classifier with parameter and MAC accounting.

pub mod audio;
pub mod augment;
pub mod cleaner;
pub mod cli;
pub mod cssm;
pub mod dataset;
pub mod error;
pub mod frontend;
pub mod model;
pub mod runlog;
pub mod scaling;

pub use audio::{load_wav, save_wav, AudioClip, SAMPLE_RATE};
pub use error::{Error, Result};
pub use frontend::{FeatureMap, FrontendConfig, Mfcc};
