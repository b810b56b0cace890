use serde::{Deserialize, Serialize};

use super::he::{compile_he, HeProgram, HeStream};
use super::CompileError;
use crate::ckks::RingParams;
use crate::gc::builder::{mod_relu, Builder};
use crate::gc::{Circuit, Gate, GcError, WireId};
use crate::sim::ArchProfile;

/// One network layer with its parameters. Weight matrices are row-major,
/// `outputs × inputs`; convolution weights are `[c_out][c_in][k][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    FullyConnected {
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    /// Stride 1, no padding.
    Conv {
        in_channels: usize,
        out_channels: usize,
        height: usize,
        width: usize,
        kernel: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
    /// Non-overlapping `size × size` windows over `channels × height × width`.
    MaxPool {
        channels: usize,
        height: usize,
        width: usize,
        size: usize,
    },
}

impl Layer {
    pub fn is_linear(&self) -> bool {
        matches!(self, Layer::FullyConnected { .. } | Layer::Conv { .. })
    }

    fn input_len(&self) -> Option<usize> {
        match self {
            Layer::FullyConnected { inputs, .. } => Some(*inputs),
            Layer::Conv { in_channels, height, width, .. } => Some(in_channels * height * width),
            Layer::Relu => None,
            Layer::MaxPool { channels, height, width, .. } => Some(channels * height * width),
        }
    }

    fn output_len(&self, input: usize) -> usize {
        match self {
            Layer::FullyConnected { outputs, .. } => *outputs,
            Layer::Conv { out_channels, height, width, kernel, .. } => {
                out_channels * (height + 1 - kernel) * (width + 1 - kernel)
            }
            Layer::Relu => input,
            Layer::MaxPool { channels, height, width, size } => channels * (height / size) * (width / size),
        }
    }

    /// Dense `outputs × inputs` matrix and bias of a linear layer.
    pub fn dense(&self) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
        match self {
            Layer::FullyConnected { inputs, outputs, weights, bias } => {
                Some(((0..*outputs).map(|o| weights[o * inputs..(o + 1) * inputs].to_vec()).collect(), bias.clone()))
            }
            Layer::Conv { in_channels, out_channels, height, width, kernel, weights, bias } => {
                let (ho, wo) = (height + 1 - kernel, width + 1 - kernel);
                let n_in = in_channels * height * width;
                let mut m = Vec::with_capacity(out_channels * ho * wo);
                let mut b = Vec::with_capacity(out_channels * ho * wo);
                for oc in 0..*out_channels {
                    for y in 0..ho {
                        for x in 0..wo {
                            let mut row = vec![0.0; n_in];
                            for ic in 0..*in_channels {
                                for dy in 0..*kernel {
                                    for dx in 0..*kernel {
                                        let w = weights[((oc * in_channels + ic) * kernel + dy) * kernel + dx];
                                        row[(ic * height + y + dy) * width + x + dx] = w;
                                    }
                                }
                            }
                            m.push(row);
                            b.push(bias[oc]);
                        }
                    }
                }
                Some((m, b))
            }
            _ => None,
        }
    }

    fn validate(&self) -> Result<(), CompileError> {
        let bad = |m: String| Err(CompileError::Shape(m));
        match self {
            Layer::FullyConnected { inputs, outputs, weights, bias } => {
                if *inputs == 0 || *outputs == 0 || weights.len() != inputs * outputs || bias.len() != *outputs {
                    return bad(format!("fully connected {inputs}→{outputs} with {} weights", weights.len()));
                }
            }
            Layer::Conv { in_channels, out_channels, height, width, kernel, weights, bias } => {
                if *kernel == 0 || kernel > height || kernel > width || *in_channels == 0 || *out_channels == 0 {
                    return bad(format!("conv kernel {kernel} over {height}×{width}"));
                }
                if weights.len() != out_channels * in_channels * kernel * kernel || bias.len() != *out_channels {
                    return bad("conv weight or bias length".into());
                }
            }
            Layer::MaxPool { height, width, size, .. } => {
                if *size == 0 || height % size != 0 || width % size != 0 {
                    return bad(format!("pool {size} over {height}×{width}"));
                }
            }
            Layer::Relu => {}
        }
        Ok(())
    }
}

/// A feed-forward network over a flat input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerGraph {
    pub input: usize,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Deserialize)]
struct Descriptor {
    input: usize,
    layers: Vec<LayerDesc>,
}

#[derive(Debug, Deserialize)]
struct LayerDesc {
    kind: String,
    #[serde(default)]
    shape: Vec<usize>,
    /// Element offset of the weights in the tensor file.
    #[serde(default)]
    weights: Option<usize>,
    #[serde(default)]
    bias: Option<usize>,
}

impl LayerGraph {
    /// Parses a JSON model descriptor `{input, layers: [{kind, shape, weights, bias}]}`.
    /// `weights`/`bias` are element offsets into `tensors`, a raw
    /// little-endian f64 file.
    ///
    /// Shapes: `fc [in, out]`, `conv [c_in, h, w, c_out, k]`,
    /// `maxpool [c, h, w, size]`, `relu []`.
    pub fn from_descriptor(json: &str, tensors: &[u8]) -> Result<Self, CompileError> {
        let d: Descriptor = serde_json::from_str(json).map_err(|e| CompileError::Invalid(format!("descriptor: {e}")))?;
        if tensors.len() % 8 != 0 {
            return Err(CompileError::Invalid("tensor file length is not a multiple of 8".into()));
        }
        let data: Vec<f64> = tensors.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let slice = |off: Option<usize>, len: usize, what: &str| -> Result<Vec<f64>, CompileError> {
            let off = off.ok_or_else(|| CompileError::Invalid(format!("{what} reference missing")))?;
            data.get(off..off + len)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| CompileError::Invalid(format!("{what} at {off}+{len} beyond the tensor file")))
        };
        let shape = |l: &LayerDesc, n: usize| -> Result<Vec<usize>, CompileError> {
            if l.shape.len() != n {
                return Err(CompileError::Shape(format!("{} expects {n} shape entries", l.kind)));
            }
            Ok(l.shape.clone())
        };
        let mut layers = Vec::with_capacity(d.layers.len());
        for l in &d.layers {
            let layer = match l.kind.as_str() {
                "fc" | "fully_connected" => {
                    let s = shape(l, 2)?;
                    Layer::FullyConnected {
                        inputs: s[0],
                        outputs: s[1],
                        weights: slice(l.weights, s[0] * s[1], "weights")?,
                        bias: slice(l.bias, s[1], "bias")?,
                    }
                }
                "conv" => {
                    let s = shape(l, 5)?;
                    Layer::Conv {
                        in_channels: s[0],
                        height: s[1],
                        width: s[2],
                        out_channels: s[3],
                        kernel: s[4],
                        weights: slice(l.weights, s[3] * s[0] * s[4] * s[4], "weights")?,
                        bias: slice(l.bias, s[3], "bias")?,
                    }
                }
                "relu" => Layer::Relu,
                "maxpool" => {
                    let s = shape(l, 4)?;
                    Layer::MaxPool { channels: s[0], height: s[1], width: s[2], size: s[3] }
                }
                k => return Err(CompileError::Invalid(format!("unknown layer kind {k}"))),
            };
            layers.push(layer);
        }
        let g = LayerGraph { input: d.input, layers };
        g.shapes()?;
        Ok(g)
    }

    /// Vector length before each layer and after the last.
    pub fn shapes(&self) -> Result<Vec<usize>, CompileError> {
        let mut v = vec![self.input];
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            let cur = *v.last().unwrap();
            if let Some(n) = l.input_len() {
                if n != cur {
                    return Err(CompileError::Shape(format!("layer {i} expects {n} inputs, gets {cur}")));
                }
            }
            v.push(l.output_len(cur));
        }
        Ok(v)
    }

    /// Plaintext forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, CompileError> {
        self.shapes()?;
        let mut v = x.to_vec();
        for l in &self.layers {
            v = match l {
                Layer::Relu => v.iter().map(|&t| t.max(0.0)).collect(),
                Layer::MaxPool { .. } => pool_windows(l)
                    .iter()
                    .map(|w| w.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max))
                    .collect(),
                _ => {
                    let (m, b) = l.dense().unwrap();
                    m.iter().zip(&b).map(|(row, bi)| row.iter().zip(&v).map(|(w, x)| w * x).sum::<f64>() + bi).collect()
                }
            };
        }
        Ok(v)
    }
}

fn pool_windows(l: &Layer) -> Vec<Vec<usize>> {
    let Layer::MaxPool { channels, height, width, size } = *l else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for c in 0..channels {
        for y in (0..height).step_by(size) {
            for x in (0..width).step_by(size) {
                out.push(
                    (0..size)
                        .flat_map(|dy| (0..size).map(move |dx| (c * height + y + dy) * width + x + dx))
                        .collect(),
                );
            }
        }
    }
    out
}

/// Matrix-vector product by the diagonal method: with `d` the padded
/// dimension, `y = Σ_k diag_k ⊙ rot(x, k)` where `diag_k[i] = W[i][(i+k) mod d]`.
///
/// Returns the program over inputs `x` (cipher), `share` (plain, added to
/// `x` first), `w{k}` (diagonals) and `offset` (plain, added after the
/// rescale), the diagonal vectors, and `d`. Vectors are packed into `d`
/// slots; all-zero diagonals are skipped.
pub fn diagonal_matvec(weights: &[Vec<f64>], level: usize) -> Result<(HeProgram, Vec<(String, Vec<f64>)>, usize), CompileError> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || weights.iter().any(|r| r.len() != cols) {
        return Err(CompileError::Shape("ragged or empty weight matrix".into()));
    }
    if level < 2 {
        return Err(CompileError::Level("matrix-vector product needs a rescale".into()));
    }
    let d = rows.max(cols).next_power_of_two();
    let at = |i: usize, j: usize| if i < rows && j < cols { weights[i][j] } else { 0.0 };
    let mut prog = HeProgram::new().cipher("x", level).plain("share", level);
    let mut diagonals = Vec::new();
    for k in 0..d {
        let diag: Vec<f64> = (0..d).map(|i| at(i, (i + k) % d)).collect();
        if diag.iter().any(|&v| v != 0.0) {
            let name = format!("w{k}");
            prog = prog.plain(&name, level);
            diagonals.push((name, diag));
        }
    }
    prog = prog.plain("offset", level - 1).add_plain("t", "x", "share");
    let mut acc: Option<String> = None;
    for (name, _) in &diagonals {
        let k: i64 = name[1..].parse().unwrap();
        let src = if k == 0 {
            "t".to_string()
        } else {
            let r = format!("r{k}");
            prog = prog.rotate(&r, "t", k);
            r
        };
        let m = format!("m{k}");
        prog = prog.mul_plain(&m, &src, name);
        acc = Some(match acc {
            None => m,
            Some(a) => {
                prog = prog.add("acc", &a, &m);
                "acc".into()
            }
        });
    }
    let acc = match acc {
        Some(a) => a,
        None => {
            // Zero matrix: multiply by the zero diagonal so the level bookkeeping still holds.
            let z = vec![0.0; d];
            prog = prog.plain("w0", level).mul_plain("m0", "t", "w0");
            diagonals.push(("w0".into(), z));
            "m0".into()
        }
    };
    prog = prog.rescale("y", &acc).add_plain("y", "y", "offset").output("y");
    Ok((prog, diagonals, d))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPhase {
    pub layer: usize,
    pub inputs: usize,
    pub outputs: usize,
    /// Slot count of every vector in the phase.
    pub slots: usize,
    /// Level of the uploaded ciphertext.
    pub level: usize,
    pub program: HeProgram,
    pub diagonals: Vec<(String, Vec<f64>)>,
    pub bias: Vec<f64>,
    pub stream: HeStream,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum NonLinearKind {
    Relu,
    MaxPool,
}

/// Fixed-point encoding of activations as residues mod `modulus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPoint {
    pub modulus: u64,
    /// Fractional bits of activations.
    pub frac_bits: u32,
    /// Fractional bits of quantized weights; a linear layer adds these to
    /// its output and the next ReLU truncates them away.
    pub weight_bits: u32,
}

impl Default for FixedPoint {
    fn default() -> Self {
        Self {
            modulus: 1_048_573,
            frac_bits: 9,
            weight_bits: 6,
        }
    }
}

impl FixedPoint {
    pub fn bits(&self) -> usize {
        64 - self.modulus.leading_zeros() as usize
    }

    pub fn quantize(v: f64, frac: u32) -> i64 {
        (v * (1u64 << frac) as f64).round() as i64
    }

    pub fn to_residue(&self, v: i64) -> u64 {
        v.rem_euclid(self.modulus as i64) as u64
    }

    /// Balanced representative in `(-p/2, p/2]`.
    pub fn centered(&self, r: u64) -> i64 {
        let p = self.modulus;
        if r > p / 2 {
            r as i64 - p as i64
        } else {
            r as i64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonLinearPhase {
    pub layer: usize,
    pub kind: NonLinearKind,
    pub inputs: usize,
    /// Fractional bits dropped from the result.
    pub shift: u32,
    /// Input indices gathered by each circuit.
    pub gather: Vec<Vec<usize>>,
    /// One circuit per output element. Inputs: the client's values, the
    /// server's values, then the evaluator's fresh output share; output:
    /// `f(client + server) − mask (mod p)`.
    pub circuits: Vec<Circuit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Phase {
    Linear(LinearPhase),
    NonLinear(NonLinearPhase),
}

/// Point between phases at which both parties hold additive shares mod `p`
/// of the activation vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub after_phase: usize,
    pub width: usize,
    pub frac_bits: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub phases: Vec<Phase>,
    pub checkpoints: Vec<Checkpoint>,
    pub fixed: FixedPoint,
    pub input_width: usize,
    pub output_width: usize,
}

impl PhasePlan {
    /// Fractional bits of the shares entering phase `i`.
    pub fn frac_bits_before(&self, i: usize) -> u32 {
        if i == 0 {
            self.fixed.frac_bits
        } else {
            self.checkpoints[i - 1].frac_bits
        }
    }
}

/// `mod_relu` followed by a right shift of the non-negative result by
/// `shift` bits, before the mask is subtracted. Same inputs as `mod_relu`.
pub fn mod_relu_shift(bits: usize, p: u64, shift: u32) -> Result<Circuit, GcError> {
    if shift == 0 {
        return mod_relu(bits, p);
    }
    if bits == 0 || bits > 63 || p < 2 || p >= 1u64 << bits || shift as usize >= bits {
        return Err(GcError::ModulusTooWide { bits, p });
    }
    let mut b = Builder::new();
    let x = b.input(bits);
    let r = b.input(bits);
    let c = b.input(bits);
    let z = b.zero();
    let pe = b.constant(p as u128, bits + 1);
    let (mut t, carry) = b.add_carry(&x, &r, None, true);
    t.push(carry.expect("carry requested"));
    let (tm, ge) = b.sub_ge(&t, &pe);
    let t = b.mux_bits(ge, &t, &tm);
    let t = &t[..bits];
    let half = b.constant(p.div_ceil(2) as u128, bits);
    let pos = b.lt(t, &half);
    let mut u: Vec<WireId> = t[shift as usize..].iter().map(|&w| b.and(w, pos)).collect();
    u.resize(bits, z);
    let (d, no_borrow) = b.sub_ge(&u, &c);
    let pb = b.constant(p as u128, bits);
    let wrapped = b.add(&d, &pb);
    let out = b.mux_bits(no_borrow, &wrapped, &d);
    b.output(&out);
    b.finish()
}

/// `max(a_i + r_i mod p)` under the balanced signed reading, minus `c` (mod p).
/// Inputs: `a_1..a_k`, `r_1..r_k`, `c`, each `bits` wide.
pub fn mod_max(bits: usize, p: u64, k: usize) -> Result<Circuit, GcError> {
    if k == 0 || bits == 0 || bits > 63 || p < 3 || p % 2 == 0 || p >= 1u64 << bits {
        return Err(GcError::ModulusTooWide { bits, p });
    }
    let mut b = Builder::new();
    let a: Vec<Vec<WireId>> = (0..k).map(|_| b.input(bits)).collect();
    let r: Vec<Vec<WireId>> = (0..k).map(|_| b.input(bits)).collect();
    let c = b.input(bits);
    let pb = b.constant(p as u128, bits + 1);
    let shift = b.constant((p / 2) as u128, bits);
    let modadd = |b: &mut Builder, x: &[WireId], y: &[WireId]| -> Vec<WireId> {
        let (mut t, carry) = b.add_carry(x, y, None, true);
        t.push(carry.expect("carry requested"));
        let (tm, ge) = b.sub_ge(&t, &pb);
        let t = b.mux_bits(ge, &t, &tm);
        t[..bits].to_vec()
    };
    // (t + ⌊p/2⌋) mod p is monotone in the signed value of t.
    let mut best: Option<Vec<WireId>> = None;
    for i in 0..k {
        let t = modadd(&mut b, &a[i], &r[i]);
        let u = modadd(&mut b, &t, &shift);
        best = Some(match best {
            None => u,
            Some(m) => {
                let lt = b.lt(&m, &u);
                b.mux_bits(lt, &m, &u)
            }
        });
    }
    let m = best.unwrap();
    let (d, no_borrow) = b.sub_ge(&m, &shift);
    let pw = b.constant(p as u128, bits);
    let wrapped = b.add(&d, &pw);
    let v = b.mux_bits(no_borrow, &wrapped, &d);
    let (d, no_borrow) = b.sub_ge(&v, &c);
    let wrapped = b.add(&d, &pw);
    let out = b.mux_bits(no_borrow, &wrapped, &d);
    b.output(&out);
    b.finish()
}

/// Side-by-side composition: input groups of `circuits[0]`, then of
/// `circuits[1]`, ...; likewise for outputs. Gates keep their order.
pub fn concat_circuits(circuits: &[Circuit]) -> Result<Circuit, GcError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates = Vec::new();
    let mut base = 0u32;
    for c in circuits {
        let shift = |w: &WireId| w + base;
        inputs.extend(c.inputs().iter().map(|g| g.iter().map(shift).collect::<Vec<_>>()));
        outputs.extend(c.outputs().iter().map(|g| g.iter().map(shift).collect::<Vec<_>>()));
        gates.extend(c.gates().iter().map(|g| Gate {
            a: g.a + base,
            b: g.b + base,
            out: g.out + base,
            ..*g
        }));
        base += c.wire_count();
    }
    Circuit::new(base, inputs, outputs, gates)
}

/// Splits `graph` into HE phases (linear layers) and GC phases (ReLU,
/// MaxPool), with a share checkpoint after every phase.
///
/// A linear layer adds `weight_bits` fractional bits; the next ReLU drops
/// them. MaxPool must not directly follow a linear layer.
pub fn compile_network(
    graph: &LayerGraph,
    params: &RingParams,
    profile: &ArchProfile,
    fixed: &FixedPoint,
) -> Result<PhasePlan, CompileError> {
    let shapes = graph.shapes()?;
    let (p, bits) = (fixed.modulus, fixed.bits());
    if bits > 62 || p % 2 == 0 {
        return Err(CompileError::Invalid(format!("share modulus {p} must be odd and below 2^62")));
    }
    let level = params.max_level();
    let mut frac = fixed.frac_bits;
    let mut phases = Vec::new();
    let mut checkpoints = Vec::new();
    for (i, l) in graph.layers.iter().enumerate() {
        let (inputs, outputs) = (shapes[i], shapes[i + 1]);
        let phase = match l {
            Layer::FullyConnected { .. } | Layer::Conv { .. } => {
                let (m, bias) = l.dense().expect("linear layer");
                let (program, diagonals, d) = diagonal_matvec(&m, level)?;
                if d > params.slots() {
                    return Err(CompileError::Shape(format!("layer {i} needs {d} slots, ring has {}", params.slots())));
                }
                let stream = compile_he(&program, params, profile)?;
                frac += fixed.weight_bits;
                Phase::Linear(LinearPhase {
                    layer: i,
                    inputs,
                    outputs,
                    slots: d,
                    level,
                    program,
                    diagonals,
                    bias,
                    stream,
                })
            }
            Layer::Relu => {
                let shift = frac - fixed.frac_bits.min(frac);
                let c = mod_relu_shift(bits, p, shift)?;
                frac -= shift;
                Phase::NonLinear(NonLinearPhase {
                    layer: i,
                    kind: NonLinearKind::Relu,
                    inputs,
                    shift,
                    gather: (0..inputs).map(|j| vec![j]).collect(),
                    circuits: vec![c; inputs],
                })
            }
            Layer::MaxPool { size, .. } => {
                if frac != fixed.frac_bits {
                    return Err(CompileError::Invalid(format!("layer {i}: max-pool directly after a linear layer")));
                }
                let c = mod_max(bits, p, size * size)?;
                let gather = pool_windows(l);
                Phase::NonLinear(NonLinearPhase {
                    layer: i,
                    kind: NonLinearKind::MaxPool,
                    inputs,
                    shift: 0,
                    circuits: vec![c; gather.len()],
                    gather,
                })
            }
        };
        phases.push(phase);
        checkpoints.push(Checkpoint { after_phase: phases.len() - 1, width: outputs, frac_bits: frac });
    }
    Ok(PhasePlan {
        phases,
        checkpoints,
        fixed: *fixed,
        input_width: graph.input,
        output_width: *shapes.last().unwrap(),
    })
}
