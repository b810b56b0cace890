use super::{ArchProfile, CoreState, SimError};
use crate::arith::LutMultiplier;
use crate::gc::GlobalDelta;
use crate::isa::layout;
use crate::isa::{lut_write, microprogram_for, uim_write, CInstKind, KernelParams};

impl CoreState {
    /// A core holding the garbling constants for `delta` with FREEXOR and HALFGATE loaded.
    pub fn for_gc(profile: &ArchProfile, delta: GlobalDelta) -> Result<Self, SimError> {
        let mut c = CoreState::new(profile);
        c.load_rows(&layout::gc_constants(delta.block()))?;
        for k in [CInstKind::FreeXor, CInstKind::HalfGate] {
            let resident = c.uim_words();
            c.apply(&uim_write(microprogram_for(k, None)?, resident)?)?;
        }
        Ok(c)
    }

    /// A core holding the modulus constants, the 4-bit product table and every HE kernel.
    pub fn for_he(profile: &ArchProfile, params: &KernelParams) -> Result<Self, SimError> {
        let mut c = CoreState::new(profile);
        c.load_rows(&layout::he_constants(&params.modulus))?;
        c.apply(&lut_write(0, LutMultiplier::shared().table())?)?;
        for k in CInstKind::ALL.iter().filter(|k| k.is_he()) {
            let p = microprogram_for(*k, Some(params))?;
            let resident = c.uim_words();
            c.apply(&uim_write(p, resident)?)?;
        }
        Ok(c)
    }
}
