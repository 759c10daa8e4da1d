use super::SpikeTensor;

/// 2x2 max pooling (logical OR) per sample and channel. Odd trailing rows
/// or columns are dropped.
pub fn max_pool(spikes: &SpikeTensor) -> SpikeTensor {
    let (ph, pw) = (spikes.height / 2, spikes.width / 2);
    let mut out = SpikeTensor::zeros(spikes.samples, spikes.channels, ph, pw);
    for b in 0..spikes.samples {
        for c in 0..spikes.channels {
            for y in 0..ph {
                for x in 0..pw {
                    let any = (0..2).any(|dy| {
                        (0..2).any(|dx| spikes.values[spikes_at(spikes, b, c, 2 * y + dy, 2 * x + dx)])
                    });
                    let o = b * out.sample_len() + out.index(c, y, x);
                    out.values[o] = any;
                }
            }
        }
    }
    out
}

fn spikes_at(t: &SpikeTensor, b: usize, c: usize, y: usize, x: usize) -> usize {
    b * t.sample_len() + t.index(c, y, x)
}

/// Flat pooled index that a conv output `(channel, y, x)` falls into, or
/// `None` on a truncated edge.
pub fn pooled_index(channel: usize, y: usize, x: usize, height: usize, width: usize) -> Option<usize> {
    let (ph, pw) = (height / 2, width / 2);
    let (py, px) = (y / 2, x / 2);
    (py < ph && px < pw).then_some((channel * ph + py) * pw + px)
}

/// Spike counts of one sample divided by that sample's largest count;
/// a silent sample maps to zeros.
pub fn spike_normalize(spike_counts: &[u32]) -> Vec<f64> {
    let max = spike_counts.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return vec![0.0; spike_counts.len()];
    }
    let m = max as f64;
    spike_counts.iter().map(|&c| c as f64 / m).collect()
}
