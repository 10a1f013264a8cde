//! Parameterized bilinear equivariant maps between irreps.
//!
//! A [`TensorProductSpec`] is a set of paths `(i_in1, i_in2, i_out)`, each
//! allowed by the selection rule and carrying a connection mode:
//!
//! | mode   | output index | weights          | fan-in    |
//! |--------|--------------|------------------|-----------|
//! | `uvw`  | `w`          | `m1 · m2 · m_out` | `m1 · m2` |
//! | `uvu`  | `u`          | `m1 · m2`         | `m2`      |
//! | `uuu`  | `u`          | `m1`              | `1`       |
//! | `uvuv` | `(u, v)`     | `m1 · m2`         | `1`       |
//!
//! Each path is scaled by `sqrt((2 l_out + 1) / fan_in)` and every output slot
//! by `sqrt(1 / paths into the slot)`, so that component-normalized inputs
//! and standard-normal weights produce outputs of unit variance.
//!
//! Weights are one flat vector: one segment per weighted instruction, in
//! instruction order, each segment row-major over its indices (`u, v, w` for
//! `uvw`).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cg::{wigner_3j, CgTensor};
use crate::error::{Error, Result};
use crate::irreps::{Irreps, MulIrrep};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Uvw,
    Uvu,
    Uuu,
    Uvuv,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Uvw => "uvw",
            Mode::Uvu => "uvu",
            Mode::Uuu => "uuu",
            Mode::Uvuv => "uvuv",
        })
    }
}

impl Mode {
    fn weight_count(self, m1: usize, m2: usize, mo: usize) -> usize {
        match self {
            Mode::Uvw => m1 * m2 * mo,
            Mode::Uvu | Mode::Uvuv => m1 * m2,
            Mode::Uuu => m1,
        }
    }

    fn fan_in(self, m1: usize, m2: usize) -> usize {
        match self {
            Mode::Uvw => m1 * m2,
            Mode::Uvu => m2,
            Mode::Uuu | Mode::Uvuv => 1,
        }
    }
}

/// One path as written by the user. `path_weight` defaults to the
/// normalization described in the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Instruction {
    pub i_in1: usize,
    pub i_in2: usize,
    pub i_out: usize,
    pub mode: Mode,
    #[serde(default = "default_true")]
    pub has_weight: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_weight: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl Instruction {
    pub fn new(i_in1: usize, i_in2: usize, i_out: usize, mode: Mode, has_weight: bool) -> Self {
        Instruction {
            i_in1,
            i_in2,
            i_out,
            mode,
            has_weight,
            path_weight: None,
        }
    }
}

/// A resolved path: normalization constant, CG block and weight segment.
#[derive(Debug, Clone)]
pub struct Path {
    pub instruction: Instruction,
    pub path_weight: f64,
    pub weight_offset: usize,
    pub weight_len: usize,
    cg: Arc<CgTensor>,
}

/// Validated tensor product. Immutable; evaluation is pure.
#[derive(Debug, Clone)]
pub struct TensorProductSpec {
    irreps_in1: Irreps,
    irreps_in2: Irreps,
    irreps_out: Irreps,
    paths: Vec<Path>,
    weight_numel: usize,
    warnings: Vec<String>,
}

/// Per-instruction diagnostics; empty when every instruction is valid.
pub fn validate(
    irreps_in1: &Irreps,
    irreps_in2: &Irreps,
    irreps_out: &Irreps,
    instructions: &[Instruction],
) -> Vec<String> {
    let mut errors = Vec::new();
    for (n, ins) in instructions.iter().enumerate() {
        let (Some(a), Some(b), Some(o)) = (
            irreps_in1.0.get(ins.i_in1),
            irreps_in2.0.get(ins.i_in2),
            irreps_out.0.get(ins.i_out),
        ) else {
            errors.push(format!(
                "instruction {n}: index out of range ({}, {}, {}) for {} / {} / {} entries",
                ins.i_in1,
                ins.i_in2,
                ins.i_out,
                irreps_in1.len(),
                irreps_in2.len(),
                irreps_out.len()
            ));
            continue;
        };
        if !(a.ir.l.abs_diff(b.ir.l) <= o.ir.l && o.ir.l <= a.ir.l + b.ir.l) {
            errors.push(format!(
                "instruction {n}: {} x {} -> {} violates |l1-l2| <= l3 <= l1+l2",
                a.ir, b.ir, o.ir
            ));
        }
        if a.ir.p * b.ir.p != o.ir.p {
            errors.push(format!(
                "instruction {n}: {} x {} -> {} violates parity p1*p2 = p3",
                a.ir, b.ir, o.ir
            ));
        }
        let mult_ok = match ins.mode {
            Mode::Uvw => true,
            Mode::Uvu => o.mul == a.mul,
            Mode::Uuu => a.mul == b.mul && b.mul == o.mul,
            Mode::Uvuv => o.mul == a.mul * b.mul,
        };
        if !mult_ok {
            errors.push(format!(
                "instruction {n}: mode {} incompatible with multiplicities {}, {}, {}",
                ins.mode, a.mul, b.mul, o.mul
            ));
        }
        if let Some(w) = ins.path_weight {
            if !w.is_finite() {
                errors.push(format!("instruction {n}: path_weight is not finite"));
            }
        }
    }
    errors
}

impl TensorProductSpec {
    pub fn new(
        irreps_in1: Irreps,
        irreps_in2: Irreps,
        irreps_out: Irreps,
        instructions: Vec<Instruction>,
    ) -> Result<Self> {
        let errors = validate(&irreps_in1, &irreps_in2, &irreps_out, &instructions);
        if !errors.is_empty() {
            return Err(Error::InvalidInstructions(errors));
        }

        let mut paths_into = vec![0usize; irreps_out.len()];
        for ins in &instructions {
            paths_into[ins.i_out] += 1;
        }
        let warnings: Vec<String> = paths_into
            .iter()
            .enumerate()
            .filter(|&(i, &n)| n == 0 && irreps_out.0[i].dim() > 0)
            .map(|(i, _)| format!("output {i} ({}) has no incoming path and is always zero", irreps_out.0[i]))
            .collect();
        for w in &warnings {
            log::warn!("{w}");
        }

        let mut paths = Vec::with_capacity(instructions.len());
        let mut offset = 0;
        for ins in instructions {
            let a = irreps_in1.0[ins.i_in1];
            let b = irreps_in2.0[ins.i_in2];
            let o = irreps_out.0[ins.i_out];
            let fan_in = ins.mode.fan_in(a.mul, b.mul);
            let path_weight = ins.path_weight.unwrap_or_else(|| {
                if fan_in == 0 {
                    0.0
                } else {
                    (o.ir.dim() as f64 / fan_in as f64 / paths_into[ins.i_out] as f64).sqrt()
                }
            });
            let weight_len = if ins.has_weight {
                ins.mode.weight_count(a.mul, b.mul, o.mul)
            } else {
                0
            };
            paths.push(Path {
                instruction: ins,
                path_weight,
                weight_offset: offset,
                weight_len,
                cg: wigner_3j(a.ir.l, b.ir.l, o.ir.l)?,
            });
            offset += weight_len;
        }
        Ok(TensorProductSpec {
            irreps_in1,
            irreps_in2,
            irreps_out,
            paths,
            weight_numel: offset,
            warnings,
        })
    }

    pub fn irreps_in1(&self) -> &Irreps {
        &self.irreps_in1
    }

    pub fn irreps_in2(&self) -> &Irreps {
        &self.irreps_in2
    }

    pub fn irreps_out(&self) -> &Irreps {
        &self.irreps_out
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn instructions(&self) -> Vec<Instruction> {
        self.paths
            .iter()
            .map(|p| Instruction {
                path_weight: Some(p.path_weight),
                ..p.instruction
            })
            .collect()
    }

    pub fn weight_numel(&self) -> usize {
        self.weight_numel
    }

    /// Outputs that no path reaches.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Evaluate the bilinear map.
    pub fn evaluate(&self, weights: &[f64], x1: &[f64], x2: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.irreps_out.dim()];
        self.evaluate_into(weights, x1, x2, &mut out)?;
        Ok(out)
    }

    /// Like [`TensorProductSpec::evaluate`], writing into a caller buffer.
    pub fn evaluate_into(
        &self,
        weights: &[f64],
        x1: &[f64],
        x2: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        check_len("weights", self.weight_numel, weights.len())?;
        check_len("first input", self.irreps_in1.dim(), x1.len())?;
        check_len("second input", self.irreps_in2.dim(), x2.len())?;
        check_len("output", self.irreps_out.dim(), out.len())?;
        out.iter_mut().for_each(|v| *v = 0.0);

        let off1 = self.irreps_in1.offsets();
        let off2 = self.irreps_in2.offsets();
        let offo = self.irreps_out.offsets();
        let mut t = Vec::new();
        for path in &self.paths {
            let ins = path.instruction;
            let a: MulIrrep = self.irreps_in1.0[ins.i_in1];
            let b: MulIrrep = self.irreps_in2.0[ins.i_in2];
            let o: MulIrrep = self.irreps_out.0[ins.i_out];
            let (d1, d2, d3) = (a.ir.dim(), b.ir.dim(), o.ir.dim());
            let in1 = |u: usize| &x1[off1[ins.i_in1] + u * d1..][..d1];
            let in2 = |v: usize| &x2[off2[ins.i_in2] + v * d2..][..d2];
            let w = &weights[path.weight_offset..path.weight_offset + path.weight_len];
            let weight = |idx: usize| if ins.has_weight { w[idx] } else { 1.0 };
            let base = offo[ins.i_out];
            t.resize(d3, 0.0);

            match ins.mode {
                Mode::Uvw if ins.has_weight && fold_first(a.mul, o.mul, d1, d3, path.cg.nonzeros().len()) => {
                    // few outputs: fold the weights into x1 before contracting
                    let mut s = vec![0.0; d1];
                    for wo in 0..o.mul {
                        let dst = &mut out[base + wo * d3..][..d3];
                        for v in 0..b.mul {
                            s.iter_mut().for_each(|x| *x = 0.0);
                            for u in 0..a.mul {
                                let c = w[(u * b.mul + v) * o.mul + wo];
                                s.iter_mut().zip(in1(u)).for_each(|(s, x)| *s += c * x);
                            }
                            path.cg.contract_into(&s, in2(v), path.path_weight, dst);
                        }
                    }
                }
                Mode::Uvw => {
                    for u in 0..a.mul {
                        for v in 0..b.mul {
                            t.iter_mut().for_each(|x| *x = 0.0);
                            path.cg.contract_into(in1(u), in2(v), path.path_weight, &mut t);
                            for wo in 0..o.mul {
                                let c = weight((u * b.mul + v) * o.mul + wo);
                                let dst = &mut out[base + wo * d3..][..d3];
                                dst.iter_mut().zip(&t).for_each(|(o, t)| *o += c * t);
                            }
                        }
                    }
                }
                Mode::Uvu => {
                    for u in 0..a.mul {
                        for v in 0..b.mul {
                            let c = weight(u * b.mul + v) * path.path_weight;
                            let dst = &mut out[base + u * d3..][..d3];
                            path.cg.contract_into(in1(u), in2(v), c, dst);
                        }
                    }
                }
                Mode::Uuu => {
                    for u in 0..a.mul {
                        let c = weight(u) * path.path_weight;
                        let dst = &mut out[base + u * d3..][..d3];
                        path.cg.contract_into(in1(u), in2(u), c, dst);
                    }
                }
                Mode::Uvuv => {
                    for u in 0..a.mul {
                        for v in 0..b.mul {
                            let c = weight(u * b.mul + v) * path.path_weight;
                            let dst = &mut out[base + (u * b.mul + v) * d3..][..d3];
                            path.cg.contract_into(in1(u), in2(v), c, dst);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Whether `Σ_u w x1` then contract (`m3 (m1 d1 + nnz)` per `v`) beats
/// contract then `Σ_w` (`m1 (nnz + m3 d3)` per `v`).
fn fold_first(m1: usize, m3: usize, d1: usize, d3: usize, nnz: usize) -> bool {
    m3 * (m1 * d1 + nnz) < m1 * (nnz + m3 * d3)
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

/// One weighted `uvw` path for every allowed `(i_in1, i_in2, i_out)`.
pub fn fully_connected(
    irreps_in1: &Irreps,
    irreps_in2: &Irreps,
    irreps_out: &Irreps,
) -> Result<TensorProductSpec> {
    let mut instructions = Vec::new();
    for (i1, a) in irreps_in1.iter().enumerate() {
        for (i2, b) in irreps_in2.iter().enumerate() {
            for (io, o) in irreps_out.iter().enumerate() {
                if a.ir.couples_to(b.ir, o.ir) {
                    instructions.push(Instruction::new(i1, i2, io, Mode::Uvw, true));
                }
            }
        }
    }
    TensorProductSpec::new(
        irreps_in1.clone(),
        irreps_in2.clone(),
        irreps_out.clone(),
        instructions,
    )
}

/// The complete, unweighted `x ⊗ y`: every pair of input entries is
/// decomposed into all allowed irreps with multiplicity `m1 · m2` (`uvuv`).
/// The result is an orthogonal change of basis of `x ⊗ y`.
pub fn full_tensor_product(irreps_in1: &Irreps, irreps_in2: &Irreps) -> Result<TensorProductSpec> {
    let mut out = Vec::new();
    let mut instructions = Vec::new();
    for (i1, a) in irreps_in1.iter().enumerate() {
        for (i2, b) in irreps_in2.iter().enumerate() {
            for ir in a.ir.selection_rule(b.ir) {
                instructions.push(Instruction::new(i1, i2, out.len(), Mode::Uvuv, false));
                out.push(MulIrrep::new(a.mul * b.mul, ir));
            }
        }
    }
    TensorProductSpec::new(
        irreps_in1.clone(),
        irreps_in2.clone(),
        Irreps::new(out),
        instructions,
    )
}

/// `x ⊗ x`. The symmetric and antisymmetric duplicates of `x_u ⊗ x_v` and
/// `x_v ⊗ x_u` are both kept.
pub fn tensor_square(irreps: &Irreps) -> Result<TensorProductSpec> {
    full_tensor_product(irreps, irreps)
}

/// Equivariant linear map: mixes multiplicities between equal irreps,
/// `out_wk = 1/sqrt(m_in) Σ_u w_uw in_uk`.
#[derive(Debug, Clone)]
pub struct Linear {
    irreps_in: Irreps,
    irreps_out: Irreps,
    /// `(i_in, i_out, weight offset, normalization)`
    paths: Vec<(usize, usize, usize, f64)>,
    weight_numel: usize,
    warnings: Vec<String>,
}

impl Linear {
    pub fn new(irreps_in: &Irreps, irreps_out: &Irreps) -> Self {
        let mut pairs = Vec::new();
        for (io, o) in irreps_out.iter().enumerate() {
            for (ii, i) in irreps_in.iter().enumerate() {
                if i.ir == o.ir {
                    pairs.push((ii, io));
                }
            }
        }
        let mut fan_in = vec![0usize; irreps_out.len()];
        for &(ii, io) in &pairs {
            fan_in[io] += irreps_in.0[ii].mul;
        }
        let mut paths = Vec::new();
        let mut offset = 0;
        for (ii, io) in pairs {
            let norm = if fan_in[io] == 0 {
                0.0
            } else {
                1.0 / (fan_in[io] as f64).sqrt()
            };
            paths.push((ii, io, offset, norm));
            offset += irreps_in.0[ii].mul * irreps_out.0[io].mul;
        }
        let warnings: Vec<String> = irreps_out
            .iter()
            .enumerate()
            .filter(|&(io, o)| o.dim() > 0 && !paths.iter().any(|p| p.1 == io))
            .map(|(io, o)| format!("output {io} ({o}) has no matching input irrep and is always zero"))
            .collect();
        for w in &warnings {
            log::warn!("{w}");
        }
        Linear {
            irreps_in: irreps_in.clone(),
            irreps_out: irreps_out.clone(),
            paths,
            weight_numel: offset,
            warnings,
        }
    }

    pub fn irreps_in(&self) -> &Irreps {
        &self.irreps_in
    }

    pub fn irreps_out(&self) -> &Irreps {
        &self.irreps_out
    }

    pub fn weight_numel(&self) -> usize {
        self.weight_numel
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn evaluate(&self, weights: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        check_len("weights", self.weight_numel, weights.len())?;
        check_len("input", self.irreps_in.dim(), x.len())?;
        let offi = self.irreps_in.offsets();
        let offo = self.irreps_out.offsets();
        let mut out = vec![0.0; self.irreps_out.dim()];
        for &(ii, io, woff, norm) in &self.paths {
            let mi = self.irreps_in.0[ii].mul;
            let mo = self.irreps_out.0[io].mul;
            let d = self.irreps_in.0[ii].ir.dim();
            for u in 0..mi {
                for w in 0..mo {
                    let c = norm * weights[woff + u * mo + w];
                    for k in 0..d {
                        out[offo[io] + w * d + k] += c * x[offi[ii] + u * d + k];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// JSON form of a tensor product. Without `instructions` the product is
/// fully connected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorProductDoc {
    pub irreps_in1: Irreps,
    pub irreps_in2: Irreps,
    pub irreps_out: Irreps,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions: Option<Vec<Instruction>>,
}

impl TensorProductDoc {
    pub fn build(&self) -> Result<TensorProductSpec> {
        match &self.instructions {
            Some(ins) => TensorProductSpec::new(
                self.irreps_in1.clone(),
                self.irreps_in2.clone(),
                self.irreps_out.clone(),
                ins.clone(),
            ),
            None => fully_connected(&self.irreps_in1, &self.irreps_in2, &self.irreps_out),
        }
    }
}

impl From<&TensorProductSpec> for TensorProductDoc {
    fn from(spec: &TensorProductSpec) -> Self {
        TensorProductDoc {
            irreps_in1: spec.irreps_in1.clone(),
            irreps_in2: spec.irreps_in2.clone(),
            irreps_out: spec.irreps_out.clone(),
            instructions: Some(spec.instructions()),
        }
    }
}
