//! Just enough script decoding to find data pushes. No execution.

use super::{ByteInterval, CodecError};

pub const OP_0: u8 = 0x00;
pub const OP_PUSHDATA1: u8 = 0x4c;
pub const OP_PUSHDATA2: u8 = 0x4d;
pub const OP_PUSHDATA4: u8 = 0x4e;
pub const OP_1NEGATE: u8 = 0x4f;
pub const OP_1: u8 = 0x51;
pub const OP_16: u8 = 0x60;
pub const OP_IF: u8 = 0x63;
pub const OP_NOTIF: u8 = 0x64;
pub const OP_ELSE: u8 = 0x67;
pub const OP_ENDIF: u8 = 0x68;
pub const OP_RETURN: u8 = 0x6a;
pub const OP_DUP: u8 = 0x76;
pub const OP_EQUALVERIFY: u8 = 0x88;
pub const OP_HASH160: u8 = 0xa9;
pub const OP_CHECKSIG: u8 = 0xac;

/// One decoded script element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instruction {
    /// A data push; `payload` is relative to the script start.
    Push {
        opcode: u8,
        offset: usize,
        payload: ByteInterval,
    },
    /// A push opcode with an empty payload (`OP_0`, or a zero-length PUSHDATA).
    EmptyPush {
        opcode: u8,
        offset: usize,
    },
    Op {
        opcode: u8,
        offset: usize,
    },
}

impl Instruction {
    pub fn opcode(&self) -> u8 {
        match *self {
            Instruction::Push { opcode, .. }
            | Instruction::EmptyPush { opcode, .. }
            | Instruction::Op { opcode, .. } => opcode,
        }
    }

    /// Statically known truth value of the stack item this pushes, if any.
    fn constant_truth(&self, script: &[u8]) -> Option<bool> {
        match *self {
            Instruction::EmptyPush { .. } => Some(false),
            Instruction::Op { opcode, .. } if opcode == OP_1NEGATE => Some(true),
            Instruction::Op { opcode, .. } if (OP_1..=OP_16).contains(&opcode) => Some(true),
            Instruction::Push { payload, .. } => {
                let data = &script[payload.start..payload.end];
                // Script booleans: zero, or negative zero, is false.
                let (last, rest) = data.split_last()?;
                Some(rest.iter().any(|&b| b != 0) || (*last & 0x7f) != 0)
            }
            _ => None,
        }
    }
}

/// Iterates over the instructions of a script, failing on a push that runs
/// past the end.
pub struct Instructions<'a> {
    script: &'a [u8],
    pos: usize,
    failed: bool,
}

pub fn instructions(script: &[u8]) -> Instructions<'_> {
    Instructions {
        script,
        pos: 0,
        failed: false,
    }
}

impl Iterator for Instructions<'_> {
    type Item = Result<Instruction, CodecError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.pos >= self.script.len() {
            return None;
        }
        let offset = self.pos;
        let opcode = self.script[offset];
        let (header, len) = match opcode {
            0x01..=0x4b => (1, opcode as usize),
            OP_PUSHDATA1 => match self.script.get(offset + 1) {
                Some(&n) => (2, n as usize),
                None => return self.fail(offset),
            },
            OP_PUSHDATA2 => match self.script.get(offset + 1..offset + 3) {
                Some(b) => (3, u16::from_le_bytes([b[0], b[1]]) as usize),
                None => return self.fail(offset),
            },
            OP_PUSHDATA4 => match self.script.get(offset + 1..offset + 5) {
                Some(b) => (5, u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize),
                None => return self.fail(offset),
            },
            OP_0 => {
                self.pos += 1;
                return Some(Ok(Instruction::EmptyPush { opcode, offset }));
            }
            _ => {
                self.pos += 1;
                return Some(Ok(Instruction::Op { opcode, offset }));
            }
        };
        let start = offset + header;
        let end = start + len;
        if end > self.script.len() {
            return self.fail(offset);
        }
        self.pos = end;
        Some(Ok(match ByteInterval::new(start, end) {
            Some(payload) => Instruction::Push {
                opcode,
                offset,
                payload,
            },
            None => Instruction::EmptyPush { opcode, offset },
        }))
    }
}

impl Instructions<'_> {
    fn fail(&mut self, offset: usize) -> Option<Result<Instruction, CodecError>> {
        self.failed = true;
        Some(Err(CodecError::MalformedScript { offset }))
    }
}

/// Whether a push directly following `OP_RETURN` yields a deletable region.
/// `OP_PUSHDATA4` is nonstandard and never does.
fn is_standard_data_push(opcode: u8) -> bool {
    matches!(opcode, 0x01..=0x4b | OP_PUSHDATA1 | OP_PUSHDATA2)
}

/// Payload ranges (script-relative) of every push that immediately follows an
/// `OP_RETURN`, wherever it occurs in the script.
pub fn op_return_payloads(script: &[u8]) -> Result<Vec<ByteInterval>, CodecError> {
    let mut out = Vec::new();
    let mut prev: Option<u8> = None;
    for ins in instructions(script) {
        let ins = ins?;
        if prev == Some(OP_RETURN) {
            if let Instruction::Push {
                opcode, payload, ..
            } = ins
            {
                if is_standard_data_push(opcode) {
                    out.push(payload);
                }
            }
        }
        prev = Some(ins.opcode());
    }
    Ok(out)
}

/// Payload ranges of `OP_RETURN` pushes that sit inside a conditional branch
/// whose condition is a constant making the branch unreachable, e.g.
/// `OP_1 OP_NOTIF OP_RETURN <data> OP_ENDIF`.
pub fn dead_branch_op_return_payloads(script: &[u8]) -> Result<Vec<ByteInterval>, CodecError> {
    // Each frame: Some(executes) when statically known, None otherwise.
    let mut frames: Vec<Option<bool>> = Vec::new();
    let mut prev: Option<Instruction> = None;
    let mut out = Vec::new();
    for ins in instructions(script) {
        let ins = ins?;
        let dead = frames.contains(&Some(false));
        match ins.opcode() {
            OP_IF | OP_NOTIF => {
                // The condition is only known if the preceding instruction
                // pushed a constant and itself ran.
                let known = if dead {
                    Some(false)
                } else {
                    prev.and_then(|p| p.constant_truth(script))
                        .map(|truth| truth ^ (ins.opcode() == OP_NOTIF))
                };
                frames.push(known);
            }
            OP_ELSE => {
                // Enclosing dead frames keep the whole region dead.
                if let Some(top) = frames.last_mut() {
                    *top = top.map(|v| !v);
                }
            }
            OP_ENDIF => {
                frames.pop();
            }
            _ => {}
        }
        if let (
            Some(p),
            Instruction::Push {
                opcode, payload, ..
            },
        ) = (prev, ins)
        {
            if p.opcode() == OP_RETURN && is_standard_data_push(opcode) && dead {
                out.push(payload);
            }
        }
        prev = Some(ins);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2_script(data: &[u8]) -> Vec<u8> {
        let mut s = vec![OP_1, OP_NOTIF, OP_RETURN, data.len() as u8];
        s.extend_from_slice(data);
        s.extend_from_slice(&[OP_ENDIF, OP_DUP, OP_HASH160, 20]);
        s.extend_from_slice(&[0x11; 20]);
        s.extend_from_slice(&[OP_EQUALVERIFY, OP_CHECKSIG]);
        s
    }

    #[test]
    fn pushes_decoded() {
        let script = [0x6a, 0x4d, 0x02, 0x00, 0xaa, 0xbb, 0x00, 0x4c, 0x00];
        let ins: Vec<_> = instructions(&script).collect::<Result<_, _>>().unwrap();
        assert_eq!(ins.len(), 4);
        assert_eq!(
            ins[1],
            Instruction::Push {
                opcode: OP_PUSHDATA2,
                offset: 1,
                payload: ByteInterval { start: 4, end: 6 }
            }
        );
        assert!(matches!(ins[2], Instruction::EmptyPush { .. }));
        assert!(matches!(ins[3], Instruction::EmptyPush { .. }));
    }

    #[test]
    fn opcode_bytes_inside_data_are_not_opcodes() {
        // the payload contains 0x6a 0x01 0xff but is data, not an OP_RETURN
        let script = [0x03, 0x6a, 0x01, 0xff];
        assert!(op_return_payloads(&script).unwrap().is_empty());
    }

    #[test]
    fn pushdata4_is_not_a_region() {
        let script = [0x6a, 0x4e, 0x01, 0, 0, 0, 0xaa];
        assert!(op_return_payloads(&script).unwrap().is_empty());
    }

    #[test]
    fn fig2_data_is_dead() {
        let s = fig2_script(b"illicit");
        let dead = dead_branch_op_return_payloads(&s).unwrap();
        assert_eq!(dead, vec![ByteInterval { start: 4, end: 11 }]);
        assert_eq!(op_return_payloads(&s).unwrap(), dead);
    }

    #[test]
    fn live_branch_is_not_dead() {
        let mut s = fig2_script(b"abc");
        s[1] = OP_IF; // OP_1 OP_IF executes the branch
        assert!(dead_branch_op_return_payloads(&s).unwrap().is_empty());
        // top-level OP_RETURN is not in a dead branch either
        assert!(dead_branch_op_return_payloads(&[OP_RETURN, 1, 9])
            .unwrap()
            .is_empty());
    }

    #[test]
    fn else_branch_flips() {
        // OP_0 OP_IF <live?no> OP_ELSE OP_RETURN <x> OP_ENDIF: else executes
        let s = [
            OP_0, OP_IF, OP_RETURN, 1, 7, OP_ELSE, OP_RETURN, 1, 8, OP_ENDIF,
        ];
        let dead = dead_branch_op_return_payloads(&s).unwrap();
        assert_eq!(dead, vec![ByteInterval { start: 4, end: 5 }]);
    }

    #[test]
    fn unknown_condition_is_not_dead() {
        let s = [OP_DUP, OP_NOTIF, OP_RETURN, 1, 7, OP_ENDIF];
        assert!(dead_branch_op_return_payloads(&s).unwrap().is_empty());
    }
}
