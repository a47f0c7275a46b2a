//! Fixtures shared by the benchmarks.

use dp4d::ssfm::transmit;
use dp4d::{generate_pm_qam, Constellation4D, LinkConfig, WaveformGrid};

pub fn pm16() -> Constellation4D {
    generate_pm_qam(16).expect("16 is a supported order")
}

/// Launched PM-16QAM waveform at the default link settings.
pub fn launched(n_symbols: usize, sps: usize) -> (LinkConfig, WaveformGrid) {
    let link = LinkConfig::default();
    let w = transmit(&pm16(), &link.signal, n_symbols, sps, 1).waveform;
    (link, w)
}
