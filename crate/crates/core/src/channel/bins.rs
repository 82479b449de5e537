use super::ChannelError;

/// Signed FFT bins carrying the `m` active subcarriers, in ascending
/// frequency order.
///
/// When `m == fft_size` every bin is active and the natural order
/// `0..fft_size` is used. Otherwise the block is contiguous around DC with DC
/// left empty: `m / 2` negative bins and `m - m / 2` positive ones. For the
/// 48-of-64 layout that is `-24..=-1` followed by `1..=24`.
pub fn active_bins(m: usize, fft_size: usize) -> Result<Vec<i64>, ChannelError> {
    if m == 0 || m > fft_size {
        return Err(ChannelError::InvalidScenario(format!(
            "{m} active subcarriers do not fit an FFT of size {fft_size}"
        )));
    }
    if m == fft_size {
        return Ok((0..fft_size as i64).collect());
    }
    let neg = (m / 2) as i64;
    let pos = (m - m / 2) as i64;
    Ok((-neg..0).chain(1..=pos).collect())
}
