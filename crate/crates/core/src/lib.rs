pub mod dists;
pub mod features;
pub mod geometry;
pub mod scene;
pub mod engine;
pub mod datagen;
pub mod cli;
