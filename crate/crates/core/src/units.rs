//! Decibel and power conversions. Powers in dBm are relative to 1 mW.

pub const PLANCK: f64 = 6.626_070_15e-34;

#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[inline]
pub fn dbm_to_w(dbm: f64) -> f64 {
    1e-3 * db_to_lin(dbm)
}

#[inline]
pub fn w_to_dbm(w: f64) -> f64 {
    lin_to_db(w / 1e-3)
}

/// Attenuation in dB/km converted to the power attenuation constant in 1/km.
#[inline]
pub fn alpha_db_to_neper(alpha_db_per_km: f64) -> f64 {
    alpha_db_per_km * std::f64::consts::LN_10 / 10.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        assert!((w_to_dbm(dbm_to_w(0.5)) - 0.5).abs() < 1e-12);
        assert!((dbm_to_w(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_w(30.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neper_conversion() {
        // 0.2 dB/km -> 0.046 1/km
        assert!((alpha_db_to_neper(0.2) - 0.046_051_701_859_880_91).abs() < 1e-15);
    }
}
