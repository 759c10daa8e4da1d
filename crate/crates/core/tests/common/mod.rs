#![allow(dead_code)]

use spikeplast::data::RawDataset;
use spikeplast::pipeline::NetworkSpec;

/// 1x10x10 input, 3x3x4 conv, 30 FC neurons, 20 steps.
pub fn tiny_spec() -> NetworkSpec {
    NetworkSpec {
        in_height: 10,
        in_width: 10,
        kernel: 3,
        conv_channels: 4,
        fc_neurons: 30,
        timesteps: 20,
        n_batch: 4,
        t_batch: 5,
        ..NetworkSpec::mnist()
    }
}

/// Ten classes of 10x10 images: class `c` lights row `c` and column
/// `9 - c`, with seeded speckle noise.
pub fn synthetic(per_class: usize, seed: u64) -> RawDataset {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) as u32
    };
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..per_class * 10 {
        let c = i % 10;
        for y in 0..10 {
            for x in 0..10 {
                let on = y == c || x == 9 - c;
                let base = if on { 200 } else { 0 };
                let noise = next() % 40;
                images.push((base + noise).min(255) as u8);
            }
        }
        labels.push(c as u8);
    }
    RawDataset::new(images, labels, (1, 10, 10), "synthetic").unwrap()
}
