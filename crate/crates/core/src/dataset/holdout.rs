use rand::Rng as _;

use super::{FingerprintDatabase, ReferencePoint};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// Moves one random scan out of every RP that has at least two. Returns
/// `(remaining, held_out)`; the held-out database holds one scan per
/// contributing RP.
pub fn split_holdout(db: &FingerprintDatabase, seed: u64) -> Result<(FingerprintDatabase, FingerprintDatabase)> {
    let mut rng = stream(seed, Stream::Track);
    let mut keep = Vec::with_capacity(db.len());
    let mut held = Vec::new();
    for rp in db.rps() {
        let mut scans = rp.scans.clone();
        if scans.len() >= 2 {
            let i = rng.random_range(0..scans.len());
            held.push(ReferencePoint {
                location: rp.location,
                scans: vec![scans.remove(i)],
            });
        }
        keep.push(ReferencePoint {
            location: rp.location,
            scans,
        });
    }
    if held.is_empty() {
        return Err(Error::EmptySelection("no reference point has two scans to hold out".into()));
    }
    Ok((
        FingerprintDatabase::new(keep, db.ap_count(), db.grid_size())?,
        FingerprintDatabase::new(held, db.ap_count(), db.grid_size())?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticEnvironment};

    #[test]
    fn holdout_partitions_scans() {
        let (db, _) = generate_synthetic(&SyntheticEnvironment::default(), 3).unwrap();
        let (a, b) = split_holdout(&db, 1).unwrap();
        assert_eq!(a.len(), db.len());
        assert_eq!(b.len(), db.len());
        assert!(a.rps().iter().all(|r| r.scans.len() == 2));
        for (i, rp) in b.rps().iter().enumerate() {
            assert!(db.rp(i).scans.contains(&rp.scans[0]));
            assert!(!a.rp(i).scans.contains(&rp.scans[0]));
        }
        let (single, _) = generate_synthetic(&SyntheticEnvironment::default(), 1).unwrap();
        assert!(split_holdout(&single, 1).is_err());
    }
}
