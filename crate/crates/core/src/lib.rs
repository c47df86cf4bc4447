pub mod campaign;
pub mod conic;
pub mod guidance;
pub mod model;
pub mod sim;
