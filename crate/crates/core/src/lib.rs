//! Surrogate regression models of ground-truth-based document image
//! quality metrics.
//!
//! Document image quality metrics (F-Measure, PSNR, DRD, NRM) require a
//! ground-truth reference image, which is unavailable for documents
//! processed on-the-fly. This crate learns the relationship between
//! cheap reference-free difference features of an (original, processed)
//! image pair and the ground-truth-based F-Measure, so the metric can be
//! predicted for unseen documents and used as an optimization objective.
//!
//! Pipeline:
//!
//! 1. [`imaging`] — grayscale/bilevel containers, PGM/PBM I/O, Otsu
//!    global thresholding.
//! 2. [`metrics`] — F-Measure, MSE/PSNR, DRD and NRM between bilevel
//!    images.
//! 3. [`dataset`] — turns (original, processed, ground-truth) triples
//!    into a feature table and manages splits and normalization.
//! 4. [`surrogates`] — GP, epsilon-SVR (SMO), ANN (Levenberg-Marquardt)
//!    and averaging-ensemble regressors with text serialization.
//! 5. [`bayesopt`] — bounded-domain Bayesian optimizer with expected
//!    improvement, used for SVR hyperparameter tuning and binarization
//!    parameter search.
//! 6. [`binarize`] — tunable Sauvola thresholding plus the closed-loop
//!    auto-binarization driven by surrogate-predicted F-Measure.

pub mod bayesopt;
pub mod binarize;
pub mod dataset;
pub mod imaging;
pub mod metrics;
mod optim;
pub mod surrogates;
