//! Reproducible random substreams.
//!
//! Every random quantity in a run is drawn from a ChaCha8 stream keyed by
//! `(master seed, domain, index)` with a 64-bit stream id on top. The
//! common-noise stream is keyed by a path id only, so that all replicas of
//! a conditional campaign can share one path; idiosyncratic streams are
//! keyed by replica and use the particle index as stream id.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u64)]
pub enum Domain {
    CommonNoise = 1,
    Initial = 2,
    Idiosyncratic = 3,
    WhiteNoise = 4,
    InitialFluctuation = 5,
    Elln = 6,
    Auxiliary = 7,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPlan {
    pub master_seed: u64,
}

impl RngPlan {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    fn key(&self, domain: Domain, index: u64) -> [u8; 32] {
        let mut seed = [0u8; 32];
        let mut z = splitmix(self.master_seed ^ splitmix(domain as u64));
        z = splitmix(z ^ index);
        for chunk in seed.chunks_exact_mut(8) {
            z = splitmix(z);
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        seed
    }

    pub fn stream(&self, domain: Domain, index: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.key(domain, index));
        rng.set_stream(stream);
        rng
    }

    pub fn common_noise(&self, path_id: u64) -> ChaCha8Rng {
        self.stream(Domain::CommonNoise, path_id, 0)
    }

    pub fn initial(&self, replica: u64) -> ChaCha8Rng {
        self.stream(Domain::Initial, replica, 0)
    }

    pub fn idiosyncratic(&self, replica: u64, particle: u64) -> ChaCha8Rng {
        self.stream(Domain::Idiosyncratic, replica, particle)
    }

    pub fn white_noise(&self, run: u64) -> ChaCha8Rng {
        self.stream(Domain::WhiteNoise, run, 0)
    }

    pub fn initial_fluctuation(&self, run: u64) -> ChaCha8Rng {
        self.stream(Domain::InitialFluctuation, run, 0)
    }

    pub fn elln(&self, batch: u64) -> ChaCha8Rng {
        self.stream(Domain::Elln, batch, 0)
    }

    pub fn auxiliary(&self, index: u64, stream: u64) -> ChaCha8Rng {
        self.stream(Domain::Auxiliary, index, stream)
    }
}

/// Human-readable description of the substream layout, echoed into run
/// manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlanSummary {
    pub master_seed: u64,
    pub generator: String,
    pub layout: Vec<String>,
}

impl From<&RngPlan> for SeedPlanSummary {
    fn from(plan: &RngPlan) -> Self {
        SeedPlanSummary {
            master_seed: plan.master_seed,
            generator: "ChaCha8 keyed by splitmix64(master, domain, index)".into(),
            layout: vec![
                "common_noise: domain 1, index = path id, stream 0".into(),
                "initial positions: domain 2, index = replica, stream 0".into(),
                "idiosyncratic increments: domain 3, index = replica, stream = particle".into(),
                "space-time white noise: domain 4, index = run, stream 0".into(),
                "initial fluctuation field: domain 5, index = run, stream 0".into(),
                "ELLN sampling: domain 6, index = batch, stream 0".into(),
            ],
        }
    }
}
