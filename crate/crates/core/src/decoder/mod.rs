//! BP+OSD decoding, sliding windows and metacheck postselection.

pub mod bp;
pub mod osd;
pub mod postselect;
pub mod window;

pub use bp::{BpConfig, BpDecoder, BpResult, BpSchedule, SparsePcm};
pub use osd::OsdDecoder;
pub use postselect::{metasyndrome, PostselectOutcome, PostselectPolicy, Postselector};
pub use window::{DecodeCache, DecodeOutcome, WindowConfig, WindowDecoder};

use crate::dem::DetectorErrorModel;
use crate::error::DecodeError;
use crate::f2::BitVec;

#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub correction: BitVec,
    /// BP alone explained the syndrome.
    pub converged: bool,
    pub iterations: usize,
}

/// BP with OSD fallback on one check matrix.
#[derive(Clone, Debug)]
pub struct BpOsdDecoder {
    pcm: SparsePcm,
    bp: BpDecoder,
    osd: OsdDecoder,
    cfg: BpConfig,
}

impl BpOsdDecoder {
    pub fn new(pcm: SparsePcm, priors: &[f64], cfg: BpConfig) -> Result<BpOsdDecoder, DecodeError> {
        cfg.validate()?;
        let bp = BpDecoder::new(&pcm, priors)?;
        let osd = OsdDecoder::new(&pcm, bp.prior_llr().to_vec());
        Ok(BpOsdDecoder { pcm, bp, osd, cfg })
    }

    pub fn from_dem(dem: &DetectorErrorModel, cfg: BpConfig) -> Result<BpOsdDecoder, DecodeError> {
        let priors: Vec<f64> = dem.mechanisms.iter().map(|m| m.p).collect();
        BpOsdDecoder::new(SparsePcm::from_dem(dem), &priors, cfg)
    }

    pub fn pcm(&self) -> &SparsePcm {
        &self.pcm
    }

    pub fn decode(&self, syndrome: &BitVec) -> Result<Decoded, DecodeError> {
        if syndrome.len() != self.pcm.rows {
            return Err(DecodeError::Dimension {
                expected: self.pcm.rows,
                found: syndrome.len(),
            });
        }
        if syndrome.is_zero() {
            return Ok(Decoded {
                correction: BitVec::zeros(self.pcm.cols),
                converged: true,
                iterations: 1,
            });
        }
        let r = self.bp.decode(syndrome, self.cfg.max_iter, self.cfg.schedule)?;
        if r.converged {
            return Ok(Decoded {
                correction: r.decision,
                converged: true,
                iterations: r.iterations,
            });
        }
        let correction = self
            .osd
            .decode(syndrome, &r.posterior_llr, self.cfg.osd_order, self.cfg.osd_exhaustive)?;
        Ok(Decoded {
            correction,
            converged: false,
            iterations: r.iterations,
        })
    }
}
