//! Enumeration limits for the exact (exponential) code paths.

/// Caps on the exponential enumerations. Exceeding a cap is reported as an
/// error by the operation that would blow up, never a silent truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Maximum number of ground atoms for world enumeration (2^n worlds).
    pub max_world_atoms: usize,
    /// Maximum number of atoms per atomic-diagram enumeration (2^n diagrams).
    pub max_diagram_atoms: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_world_atoms: 24,
            max_diagram_atoms: 20,
        }
    }
}

impl Caps {
    /// Default caps, with `FREQNET_CAP` (if set and parseable) overriding the
    /// world-enumeration cap.
    pub fn from_env() -> Self {
        let mut caps = Caps::default();
        if let Ok(v) = std::env::var("FREQNET_CAP") {
            if let Ok(n) = v.trim().parse::<usize>() {
                caps.max_world_atoms = n;
            }
        }
        caps
    }

    pub fn with_world_atoms(mut self, n: usize) -> Self {
        self.max_world_atoms = n;
        self
    }

    pub fn with_diagram_atoms(mut self, n: usize) -> Self {
        self.max_diagram_atoms = n;
        self
    }
}
