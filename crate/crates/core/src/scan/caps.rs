use std::fmt;

/// Instruction set a kernel variant is compiled for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Isa {
    Scalar,
    Ssse3,
    Avx2,
    Avx512Bw,
    Avx512Vbmi,
}

impl Isa {
    pub fn name(self) -> &'static str {
        match self {
            Isa::Scalar => "scalar",
            Isa::Ssse3 => "ssse3",
            Isa::Avx2 => "avx2",
            Isa::Avx512Bw => "avx512bw",
            Isa::Avx512Vbmi => "avx512vbmi",
        }
    }
}

impl fmt::Display for Isa {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Vector extensions usable on this host.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Capabilities {
    pub ssse3: bool,
    pub avx2: bool,
    pub avx512bw: bool,
    pub avx512vbmi: bool,
}

impl Capabilities {
    pub fn none() -> Self {
        Self::default()
    }

    #[cfg(target_arch = "x86_64")]
    pub fn detect() -> Self {
        let f = std::arch::is_x86_feature_detected!("avx512f");
        let bw = f && std::arch::is_x86_feature_detected!("avx512bw");
        Self {
            ssse3: std::arch::is_x86_feature_detected!("ssse3"),
            avx2: std::arch::is_x86_feature_detected!("avx2"),
            avx512bw: bw,
            avx512vbmi: bw && std::arch::is_x86_feature_detected!("avx512vbmi"),
        }
    }

    #[cfg(not(target_arch = "x86_64"))]
    pub fn detect() -> Self {
        Self::none()
    }

    pub fn has(&self, isa: Isa) -> bool {
        match isa {
            Isa::Scalar => true,
            Isa::Ssse3 => self.ssse3,
            Isa::Avx2 => self.avx2,
            Isa::Avx512Bw => self.avx512bw,
            Isa::Avx512Vbmi => self.avx512vbmi,
        }
    }

    pub fn available(&self) -> Vec<Isa> {
        [Isa::Ssse3, Isa::Avx2, Isa::Avx512Bw, Isa::Avx512Vbmi]
            .into_iter()
            .filter(|&i| self.has(i))
            .collect()
    }
}
