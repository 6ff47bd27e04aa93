//! Adam, the training loop, gradient checking and checkpoints.

mod adam;
mod checkpoint;
mod gradcheck;
mod network;
mod train;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, load_checkpoint_expecting, save_checkpoint, MAGIC,
    VERSION,
};
pub use gradcheck::finite_difference_check;
pub use network::{ModelSpec, NetworkGrads, NetworkModel, Topology, TopologyKind};
pub use train::{accuracy, batch_gradient, train, TrainConfig, TrainOutcome};
