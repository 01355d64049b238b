use ndarray::Axis;

use crate::data::Trial;
use crate::error::{Error, Result};

/// Subtracts the across-channel mean from every sample.
pub fn common_average_reference(trial: &Trial) -> Result<Trial> {
    if trial.n_channels() < 2 {
        return Err(Error::TooFewChannels {
            required: 2,
            found: trial.n_channels(),
        });
    }
    let mean = trial.samples.mean_axis(Axis(0)).expect("non-empty");
    let mut out = trial.clone();
    for mut row in out.samples.rows_mut() {
        row -= &mean;
    }
    Ok(out)
}
