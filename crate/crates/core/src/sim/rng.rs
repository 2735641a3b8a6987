use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Purpose label for a random substream.
///
/// Each purpose maps to a distinct ChaCha stream of the run seed, so draws
/// made for one purpose never shift the sequence seen by another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StreamId {
    Mobility,
    RadioLoss,
    GameDraw,
    Assessment,
    Mac,
    Traffic,
}

impl StreamId {
    pub fn index(self) -> u64 {
        match self {
            StreamId::Mobility => 1,
            StreamId::RadioLoss => 2,
            StreamId::GameDraw => 3,
            StreamId::Assessment => 4,
            StreamId::Mac => 5,
            StreamId::Traffic => 6,
        }
    }
}

/// Factory for per-purpose random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        RngStreams { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, id: StreamId) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id.index());
        rng
    }
}
