use thiserror::Error;

use crate::world::WorldState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodecError {
    #[error("state cannot be encoded: {0}")]
    Unencodable(String),
    #[error("malformed state at byte {offset}: {message}")]
    MalformedState { offset: usize, message: String },
}

/// Byte offset of a 1-based (line, column) position reported by the JSON parser.
pub(crate) fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let line_start = bytes
        .split_inclusive(|b| *b == b'\n')
        .take(line.saturating_sub(1))
        .map(<[u8]>::len)
        .sum::<usize>();
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

/// Canonical JSON rendering: object keys sorted, every real a hex-float string.
pub fn to_canonical<T: serde::Serialize>(value: &T) -> Result<String, CodecError> {
    // serde_json::Value keeps object keys in a BTreeMap, which sorts them.
    let v = serde_json::to_value(value).map_err(|e| CodecError::Unencodable(e.to_string()))?;
    serde_json::to_string(&v).map_err(|e| CodecError::Unencodable(e.to_string()))
}

pub fn from_canonical<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, CodecError> {
    serde_json::from_slice(bytes).map_err(|e| CodecError::MalformedState {
        offset: byte_offset(bytes, e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn encode_state(world: &WorldState) -> Result<Vec<u8>, CodecError> {
    to_canonical(world).map(String::into_bytes)
}

pub fn decode_state(bytes: &[u8]) -> Result<WorldState, CodecError> {
    from_canonical(bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Attachment, AttachmentParent, JointVector, ObjectState, Surface};
    use crate::Pose;

    fn sample() -> WorldState {
        let mut w = WorldState::empty(JointVector([0.1, -0.2, 0.3]), Pose::new(1.5, 0.1, 0.2), 0.15);
        w.objects.insert(
            "cup".into(),
            ObjectState {
                pose: Pose::new(1.8, 0.0, 0.0),
                height: 0.0,
                width: 0.08,
                mass: 0.2,
                crushed: false,
            },
        );
        w.surfaces.insert(
            "table".into(),
            Surface {
                center: [1.8, 0.0],
                half_extents: [0.6, 0.45],
                elevation: 0.0,
            },
        );
        w.attach(Attachment {
            child: "cup".into(),
            parent: AttachmentParent::EnvironmentResting { surface: "table".into() },
        });
        w.target = Some("cup".into());
        w
    }

    #[test]
    fn encodes_hex_and_sorted_keys() {
        let w = sample();
        let text = String::from_utf8(encode_state(&w).unwrap()).unwrap();
        assert!(text.contains("\"aperture\":\"0x1.3333333333333p-3\""));
        assert!(text.contains("\"ee_height\":\"0x0p+0\""));
        let a = text.find("\"aperture\"").unwrap();
        let j = text.find("\"joints\"").unwrap();
        let t = text.find("\"time_step\"").unwrap();
        assert!(a < j && j < t);
        assert!(!text.contains('\n'));
        assert_eq!(decode_state(text.as_bytes()).unwrap(), w);
    }

    #[test]
    fn rejects_nan() {
        let mut w = sample();
        w.wrist_force = f64::NAN;
        assert!(matches!(encode_state(&w), Err(CodecError::Unencodable(_))));
    }

    #[test]
    fn malformed_reports_offset() {
        let text = String::from_utf8(encode_state(&sample()).unwrap()).unwrap();
        let broken = text.replacen("0x1.3333333333333p-3", "0.15", 1);
        match decode_state(broken.as_bytes()) {
            Err(CodecError::MalformedState { offset, .. }) => {
                assert!(offset > 0 && offset <= broken.len());
            }
            other => panic!("unexpected {other:?}"),
        }
        match decode_state(b"{\"joints\":") {
            Err(CodecError::MalformedState { offset, .. }) => assert!((9..=10).contains(&offset)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn offset_accounts_for_lines() {
        assert_eq!(byte_offset(b"ab\ncd\nef", 3, 2), 7);
        assert_eq!(byte_offset(b"abc", 1, 1), 0);
    }
}
