//! Building a codec from command-line parameters.

use anyhow::Result;
use clap::{Args, ValueEnum};
use flashcode::{
    BufferCode, BufferConfig, ConstRateCode, ConstRateConfig, IndexVariant, IndexlessCode, IndexlessConfig,
    StagedCode, StagedConfig, TwoBitCode, TwoBitConfig,
};

use crate::{lib_err, usage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Twobit,
    Indexless,
    Staged,
    StagedStacked,
    Constrate,
    Buffer,
}

impl SchemeKind {
    fn grammar(self) -> &'static str {
        match self {
            SchemeKind::Twobit => "--scheme twobit --n N --q Q",
            SchemeKind::Indexless => "--scheme indexless --n N --k K --q Q",
            SchemeKind::Staged => "--scheme staged (--n N | --parity-cells P) --k K --q Q",
            SchemeKind::StagedStacked => "--scheme staged-stacked (--n N | --parity-cells P) --k K --q Q",
            SchemeKind::Constrate => "--scheme constrate --n N --k K --q Q",
            SchemeKind::Buffer => "--scheme buffer --n N --q Q --r R",
        }
    }
}

#[derive(Args, Debug)]
pub struct SchemeArgs {
    #[arg(long, value_enum)]
    pub scheme: SchemeKind,
    /// Total number of cells.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of information bits.
    #[arg(long)]
    pub k: Option<usize>,
    /// Levels per cell.
    #[arg(long)]
    pub q: u32,
    /// Buffer length.
    #[arg(long)]
    pub r: Option<usize>,
    /// Staged codes only: size the memory from its parity region.
    #[arg(long, conflicts_with = "n")]
    pub parity_cells: Option<usize>,
}

pub enum Built {
    TwoBit(TwoBitCode),
    Indexless(IndexlessCode),
    Staged(StagedCode),
    ConstRate(ConstRateCode),
    Buffer(BufferCode),
}

/// Runs `$body` with `$code` bound to the concrete codec.
macro_rules! dispatch {
    ($built:expr, $code:ident => $body:expr) => {
        match $built {
            $crate::schemes::Built::TwoBit($code) => $body,
            $crate::schemes::Built::Indexless($code) => $body,
            $crate::schemes::Built::Staged($code) => $body,
            $crate::schemes::Built::ConstRate($code) => $body,
            $crate::schemes::Built::Buffer($code) => $body,
        }
    };
}

impl SchemeArgs {
    fn need(&self, value: Option<usize>, flag: &str) -> Result<usize> {
        value.ok_or_else(|| usage(format!("missing --{flag}; expected {}", self.scheme.grammar())))
    }

    fn reject(&self, value: Option<usize>, flag: &str) -> Result<()> {
        match value {
            Some(_) => Err(usage(format!("--{flag} does not apply; expected {}", self.scheme.grammar()))),
            None => Ok(()),
        }
    }

    pub fn build(&self) -> Result<Built> {
        let q = self.q;
        let staged_only = |s: &Self| s.reject(s.parity_cells, "parity-cells");
        Ok(match self.scheme {
            SchemeKind::Twobit => {
                self.reject(self.k, "k")?;
                self.reject(self.r, "r")?;
                staged_only(self)?;
                Built::TwoBit(TwoBitCode::new(TwoBitConfig::new(self.need(self.n, "n")?, q).map_err(lib_err)?))
            }
            SchemeKind::Indexless => {
                self.reject(self.r, "r")?;
                staged_only(self)?;
                let cfg = IndexlessConfig::new(self.need(self.n, "n")?, self.need(self.k, "k")?, q).map_err(lib_err)?;
                Built::Indexless(IndexlessCode::new(cfg))
            }
            SchemeKind::Staged | SchemeKind::StagedStacked => {
                self.reject(self.r, "r")?;
                let variant = if self.scheme == SchemeKind::Staged {
                    IndexVariant::PerStage
                } else {
                    IndexVariant::StackedBinary
                };
                let k = self.need(self.k, "k")?;
                let cfg = match (self.n, self.parity_cells) {
                    (_, Some(p)) => StagedConfig::with_parity_cells(p, k, q, variant),
                    (n, None) => StagedConfig::new(self.need(n, "n")?, k, q, variant),
                }
                .map_err(lib_err)?;
                Built::Staged(StagedCode::new(cfg))
            }
            SchemeKind::Constrate => {
                self.reject(self.r, "r")?;
                staged_only(self)?;
                let cfg = ConstRateConfig::new(self.need(self.n, "n")?, self.need(self.k, "k")?, q).map_err(lib_err)?;
                Built::ConstRate(ConstRateCode::new(cfg))
            }
            SchemeKind::Buffer => {
                self.reject(self.k, "k")?;
                staged_only(self)?;
                let cfg = BufferConfig::new(self.need(self.n, "n")?, q, self.need(self.r, "r")?).map_err(lib_err)?;
                Built::Buffer(BufferCode::new(cfg))
            }
        })
    }
}
