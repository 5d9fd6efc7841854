//! The base bag classifier used to score candidate instances.

mod classifier;
mod fisher;

pub use classifier::{accuracy, predict_bag, train_bag_classifier, BagClassifier, BaseConfig, MifvClassifier};
pub use fisher::{fisher_encode, FisherEncoder, FisherNorm};
