//! Named qubit registers.
//!
//! Bit order convention used across the crate: inside a register, qubit
//! `start + i` carries bit `i` of the register value (little-endian), and the
//! global basis index has bit `q` equal to the state of qubit `q`.

use crate::error::{Error, Result};

/// A contiguous range of qubits with a name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl Register {
    pub fn qubits(&self) -> Vec<usize> {
        (self.start..self.start + self.len).collect()
    }
}

/// Ordered set of disjoint registers covering `0..num_qubits`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QubitLayout {
    registers: Vec<Register>,
    num_qubits: usize,
}

impl QubitLayout {
    /// Builds a layout from `(name, len)` pairs placed back to back.
    pub fn sequential<S: AsRef<str>>(regs: &[(S, usize)]) -> Result<Self> {
        let mut start = 0;
        let mut out = Vec::with_capacity(regs.len());
        for (name, len) in regs {
            out.push(Register { name: name.as_ref().to_string(), start, len: *len });
            start += len;
        }
        Self::from_registers(out)
    }

    /// Validates arbitrary registers: unique names, disjoint ranges, full cover.
    pub fn from_registers(registers: Vec<Register>) -> Result<Self> {
        let total: usize = registers.iter().map(|r| r.len).sum();
        let mut seen = vec![false; total];
        for (i, r) in registers.iter().enumerate() {
            if registers[..i].iter().any(|o| o.name == r.name) {
                return Err(Error::Config(format!("duplicate register name '{}'", r.name)));
            }
            for q in r.start..r.start + r.len {
                if q >= total || seen[q] {
                    return Err(Error::Config(format!(
                        "register '{}' overlaps another register or leaves a gap",
                        r.name
                    )));
                }
                seen[q] = true;
            }
        }
        Ok(Self { registers, num_qubits: total })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn registers(&self) -> &[Register] {
        &self.registers
    }

    pub fn has(&self, name: &str) -> bool {
        self.registers.iter().any(|r| r.name == name)
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| Error::Config(format!("unknown register '{name}'")))
    }

    pub fn qubits(&self, name: &str) -> Result<Vec<usize>> {
        Ok(self.register(name)?.qubits())
    }

    /// The single qubit of a one-qubit register.
    pub fn qubit(&self, name: &str) -> Result<usize> {
        let r = self.register(name)?;
        if r.len != 1 {
            return Err(Error::Config(format!("register '{name}' has {} qubits, expected 1", r.len)));
        }
        Ok(r.start)
    }

    /// Extracts the value held by a register from a global basis index.
    pub fn value_of(&self, name: &str, index: usize) -> Result<usize> {
        let r = self.register(name)?;
        Ok((index >> r.start) & ((1usize << r.len) - 1))
    }
}
