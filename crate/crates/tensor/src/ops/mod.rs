mod activation;
mod attention;
mod conv;
mod elementwise;
mod linear;
mod norm;
mod spatial;

pub use conv::conv2d_output_size;
