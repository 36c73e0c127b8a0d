pub mod conform;
pub mod datagen;
pub mod model;
pub mod molio;
pub mod overlay;
pub mod tensor;
pub mod train;
