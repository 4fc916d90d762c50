//! dB / linear conversions. Every conversion in the crate goes through here.

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[inline]
pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

#[inline]
pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w) + 30.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_levels() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-12);
        assert!((dbm_to_watts(46.0) - 39.810_717_055).abs() < 1e-6);
        assert!((watts_to_dbm(0.001) - 0.0).abs() < 1e-12);
        assert!((db_to_linear(3.0) - 1.995_262_3).abs() < 1e-6);
    }

    #[test]
    fn round_trip() {
        for db in [-165.0, -3.0, 0.0, 12.5, 46.0] {
            assert!((linear_to_db(db_to_linear(db)) - db).abs() < 1e-9);
        }
    }
}
