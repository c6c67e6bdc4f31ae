pub mod augment;
pub mod eval;
pub mod nn;
pub mod seed;
pub mod series;
pub mod shapley;
pub mod wgan;
pub mod xirp;
