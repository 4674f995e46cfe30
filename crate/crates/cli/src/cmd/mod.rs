pub mod bench;
pub mod bounds;
pub mod encode;
pub mod eval;
pub mod power;
pub mod simulate;
pub mod sweep;
pub mod train;

use std::path::Path;

use graph_dna::factorize::{RatingData, Split};

use crate::CliError;

/// Load a ratings file and apply whichever split files were given; entries
/// not listed in any split file stay in the train split.
pub fn load_ratings(
    ratings: &Path,
    split_train: Option<&Path>,
    split_validation: Option<&Path>,
    split_test: Option<&Path>,
) -> Result<RatingData, CliError> {
    let mut data = RatingData::load(ratings)?;
    // train first (a no-op on the default tags, validates the indices), so
    // any overlap with the held-out files trips the double-assignment error
    if let Some(path) = split_train {
        data.apply_split_file(path, Split::Train)?;
    }
    if let Some(path) = split_validation {
        data.apply_split_file(path, Split::Validation)?;
    }
    if let Some(path) = split_test {
        data.apply_split_file(path, Split::Test)?;
    }
    Ok(data)
}
