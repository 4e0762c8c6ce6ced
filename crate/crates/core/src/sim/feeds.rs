//! External price series standing in for markets outside the simulated
//! pools. Prices are exact rationals quoting the base token in the quote
//! token.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::amount::{Price, Tick, BPS};

/// Walk prices are floored to multiples of `1 / WALK_GRID` so their
/// denominators stay bounded.
pub const WALK_GRID: u64 = 1_000_000_000_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Series {
    Constant(Price),
    /// `(tick, price)` points with strictly increasing ticks starting at 0;
    /// each price holds until the next point.
    Piecewise(Vec<(Tick, Price)>),
    /// Multiplies by `1 ± step_bps / 10000` each tick, direction drawn from
    /// the feed's own RNG stream.
    GeometricWalk { p0: Price, step_bps: u32 },
}

impl Series {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |p: &Price| p > &Price::zero();
        match self {
            Series::Constant(p) if !positive(p) => Err("price must be positive".into()),
            Series::Constant(_) => Ok(()),
            Series::Piecewise(points) => {
                if points.first().map(|(t, _)| *t) != Some(0) {
                    return Err("first point must be at tick 0".into());
                }
                if points.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err("ticks must be strictly increasing".into());
                }
                if !points.iter().all(|(_, p)| positive(p)) {
                    return Err("prices must be positive".into());
                }
                Ok(())
            }
            Series::GeometricWalk { p0, step_bps } => {
                if !positive(p0) {
                    return Err("p0 must be positive".into());
                }
                if u64::from(*step_bps) >= BPS {
                    return Err("step_bps must be below 10000".into());
                }
                Ok(())
            }
        }
    }
}

fn floor_to_grid(p: &Price) -> Price {
    let grid = BigInt::from(WALK_GRID);
    let scaled = (p * Price::from_integer(grid.clone())).floor().to_integer();
    let scaled = if scaled.is_zero() { BigInt::one() } else { scaled };
    Price::new(scaled, grid)
}

/// A series plus the state needed to evaluate it tick by tick.
#[derive(Clone, Debug)]
pub struct Feed {
    pub label: String,
    series: Series,
    rng: ChaCha8Rng,
    walk: Vec<Price>,
}

impl Feed {
    pub fn new(label: String, series: Series, rng: ChaCha8Rng) -> Self {
        let walk = match &series {
            Series::GeometricWalk { p0, .. } => vec![floor_to_grid(p0)],
            _ => Vec::new(),
        };
        Feed { label, series, rng, walk }
    }

    pub fn series(&self) -> &Series {
        &self.series
    }

    /// Price at `tick`. Walk feeds extend their path on demand, so the
    /// value at a tick is independent of query order.
    pub fn price_at(&mut self, tick: Tick) -> Price {
        match &self.series {
            Series::Constant(p) => p.clone(),
            Series::Piecewise(points) => {
                let idx = points.partition_point(|(t, _)| *t <= tick);
                points[idx - 1].1.clone()
            }
            Series::GeometricWalk { step_bps, .. } => {
                let step = Price::new(BigInt::from(*step_bps), BigInt::from(BPS));
                while (self.walk.len() as u64) <= tick {
                    let last = self.walk.last().expect("walk starts at p0").clone();
                    let factor = if self.rng.gen::<bool>() {
                        Price::one() + &step
                    } else {
                        Price::one() - &step
                    };
                    self.walk.push(floor_to_grid(&(last * factor)));
                }
                self.walk[tick as usize].clone()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::amount::parse_price;
    use rand::SeedableRng;

    fn p(s: &str) -> Price {
        parse_price(s).unwrap()
    }

    #[test]
    fn piecewise_holds_until_next_point() {
        let mut f = Feed::new(
            "f".into(),
            Series::Piecewise(vec![(0, p("1")), (5, p("4")), (9, p("1/4"))]),
            ChaCha8Rng::seed_from_u64(0),
        );
        assert_eq!(f.price_at(0), p("1"));
        assert_eq!(f.price_at(4), p("1"));
        assert_eq!(f.price_at(5), p("4"));
        assert_eq!(f.price_at(100), p("1/4"));
    }

    #[test]
    fn piecewise_validation() {
        assert!(Series::Piecewise(vec![(1, p("1"))]).validate().is_err());
        assert!(Series::Piecewise(vec![(0, p("1")), (0, p("2"))]).validate().is_err());
        assert!(Series::Piecewise(vec![(0, p("1")), (3, p("2"))]).validate().is_ok());
        assert!(Series::GeometricWalk { p0: p("1"), step_bps: 10_000 }.validate().is_err());
    }

    #[test]
    fn walk_is_seeded_and_query_order_free() {
        let series = Series::GeometricWalk { p0: p("2.5"), step_bps: 50 };
        let mut a = Feed::new("a".into(), series.clone(), ChaCha8Rng::seed_from_u64(3));
        let mut b = Feed::new("b".into(), series, ChaCha8Rng::seed_from_u64(3));
        let late = a.price_at(40);
        let path: Vec<Price> = (0..=40).map(|t| b.price_at(t)).collect();
        assert_eq!(path[40], late);
        assert_eq!(path[0], p("2.5"));
        for w in path.windows(2) {
            let r = &w[1] / &w[0];
            assert!(r > p("0.99") && r < p("1.01"));
            assert!(w[1] > Price::zero());
        }
    }
}
