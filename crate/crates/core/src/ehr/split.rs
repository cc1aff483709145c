use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Admission;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortSplit {
    pub train: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

/// Seeded shuffle, then the first `floor(n * train_fraction)` admissions go to
/// train. Both sides are kept non-empty.
pub fn split_cohort(
    admissions: &[Admission],
    train_fraction: f64,
    seed: u64,
) -> Result<CohortSplit> {
    if admissions.len() < 2 {
        return Err(Error::invalid("splitting needs at least 2 admissions"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} is outside (0, 1)"
        )));
    }
    let n = admissions.len();
    let mut ids: Vec<String> = admissions.iter().map(|a| a.admission_id.clone()).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64 * train_fraction).floor() as usize).clamp(1, n - 1);
    let test = ids.split_off(cut);
    Ok(CohortSplit {
        train: ids,
        test,
        seed,
    })
}
