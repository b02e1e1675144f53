use std::path::PathBuf;

/// MNIST IDX directory: `MNIST_DIR` if set, else `data/mnist` at the
/// workspace root.
pub fn mnist_dir() -> PathBuf {
    match std::env::var_os("MNIST_DIR") {
        Some(d) => PathBuf::from(d),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"),
    }
}
