//! Conditional variational autoencoder over preference attributes.

mod grid;
mod model;
mod train;


pub use grid::{grid_search, GridEntry, GridResult, GridSpec, GridTask};
pub use model::{gaussian_kl, reparameterize, Cvae, CvaeGradients, LatentParams, LossBreakdown, LOG_FLOOR};
pub use train::{
    dataset_loss, hidden_widths, output_segments, standard_normal, train, train_with_records, CvaeConfig, EpochLoss,
    TrainedModel,
};
