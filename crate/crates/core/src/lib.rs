pub mod autodiff;
pub mod classes;
pub mod geovec;
pub mod raster;
pub mod tensor;
pub mod swin;
pub mod tiler;
pub mod train;
pub mod fixture;
pub mod cli;
