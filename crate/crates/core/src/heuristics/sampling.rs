use std::collections::HashSet;

use rand::Rng;

use super::HeuristicsError;

/// A subset pool over a `k`-element opinion domain, as bit masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetPool {
    k: usize,
    /// statements excluded from every subset
    excluded: u64,
    /// subsets contained in this mask are excluded
    covered: Option<u64>,
}

impl SubsetPool {
    /// All non-empty subsets.
    pub fn unfiltered(k: usize) -> Result<Self, HeuristicsError> {
        check_size(k)?;
        Ok(Self {
            k,
            excluded: 0,
            covered: None,
        })
    }

    /// Non-empty subsets disjoint from `neg` and not contained in `com`.
    pub fn filtered(k: usize, neg: u64, com: u64) -> Result<Self, HeuristicsError> {
        check_size(k)?;
        Ok(Self {
            k,
            excluded: neg,
            covered: Some(com & !neg),
        })
    }

    fn free(&self) -> u64 {
        full_mask(self.k) & !self.excluded
    }

    pub fn size(&self) -> u128 {
        let f = self.free().count_ones();
        let covered = self.covered.map_or(0, |c| 1u128 << c.count_ones());
        // the empty set is always inadmissible; it is counted in `covered` when present
        (1u128 << f) - covered.max(1)
    }

    pub fn contains(&self, mask: u64) -> bool {
        mask != 0
            && mask & !self.free() == 0
            && self.covered.map_or(true, |c| mask & !c != 0)
    }

    fn enumerate(&self) -> Vec<u64> {
        let free = self.free();
        // iterate the submasks of `free` in increasing order
        let mut out = Vec::new();
        let mut sub: u64 = 0;
        loop {
            sub = sub.wrapping_sub(free) & free;
            if sub == 0 {
                break;
            }
            if self.contains(sub) {
                out.push(sub);
            }
        }
        out
    }

    fn draw(&self, rng: &mut impl Rng) -> u64 {
        let free = self.free();
        loop {
            let candidate = rng.gen::<u64>() & free;
            if self.contains(candidate) {
                return candidate;
            }
        }
    }
}

fn full_mask(k: usize) -> u64 {
    if k == 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

fn check_size(k: usize) -> Result<(), HeuristicsError> {
    if k == 0 {
        return Err(HeuristicsError::EmptyPosition);
    }
    if k > 63 {
        return Err(HeuristicsError::TooLarge(k));
    }
    Ok(())
}

/// Sampled subset masks; `exhausted` when the whole pool was returned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSample {
    pub masks: Vec<u64>,
    pub exhausted: bool,
}

/// `⌈β·k⌉`
pub fn requested_samples(k: usize, beta: f64) -> usize {
    (beta * k as f64).ceil().max(0.0) as usize
}

/// Draws `⌈β·k⌉` distinct subsets uniformly without replacement, or the whole
/// pool when it is not larger than the request.
pub fn sample_subsets(
    pool: &SubsetPool,
    beta: f64,
    rng: &mut impl Rng,
) -> Result<SubsetSample, HeuristicsError> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(HeuristicsError::InvalidBeta(beta));
    }
    let request = requested_samples(pool.k, beta);
    let size = pool.size();
    if size == 0 {
        return Err(HeuristicsError::EmptyPool);
    }
    if request as u128 >= size {
        return Ok(SubsetSample {
            masks: pool.enumerate(),
            exhausted: true,
        });
    }
    let mut seen = HashSet::with_capacity(request);
    let mut masks = Vec::with_capacity(request);
    while masks.len() < request {
        let m = pool.draw(rng);
        if seen.insert(m) {
            masks.push(m);
        }
    }
    Ok(SubsetSample {
        masks,
        exhausted: false,
    })
}
