//! Simulated two-phase session over an in-process noiseless broadcast.
//!
//! Wire format: every frame is one type octet, a 4-octet little-endian
//! payload length, then the payload. Bit strings inside a payload carry a
//! 4-octet little-endian bit count followed by the bits packed LSB first,
//! zero-padded to a whole octet.
//!
//! | type | payload |
//! |------|---------|
//! | `0x01` placement | user `u32`, key `u64`, cache bits |
//! | `0x02` delivery | header bits, payload bits |
//! | `0x03` decode report | user `u32`, file `u32`, match `u8`, decoded bits |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    packed_bytes, Bits, CacheContent, DeliveryMessage, DemandVector, FileStore, KeyAssignment,
    PrivacyClass, Scheme, UserView,
};

pub const FRAME_PLACEMENT: u8 = 0x01;
pub const FRAME_DELIVERY: u8 = 0x02;
pub const FRAME_DECODE_REPORT: u8 = 0x03;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Placement { user: u32, key: u64, cache: Bits },
    Delivery { header: Bits, payload: Bits },
    DecodeReport { user: u32, file: u32, matched: bool, decoded: Bits },
}

fn put_bits(out: &mut Vec<u8>, bits: &Bits) {
    out.extend_from_slice(&(bits.len() as u32).to_le_bytes());
    out.extend_from_slice(&packed_bytes(bits));
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Decode("truncated frame".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn bits(&mut self) -> Result<Bits> {
        let len = self.u32()? as usize;
        let bytes = self.take(len.div_ceil(8))?;
        let mut bits = Bits::from_slice(bytes);
        bits.truncate(len);
        Ok(bits)
    }
}

impl Frame {
    pub fn kind(&self) -> u8 {
        match self {
            Frame::Placement { .. } => FRAME_PLACEMENT,
            Frame::Delivery { .. } => FRAME_DELIVERY,
            Frame::DecodeReport { .. } => FRAME_DECODE_REPORT,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut body = Vec::new();
        match self {
            Frame::Placement { user, key, cache } => {
                body.extend_from_slice(&user.to_le_bytes());
                body.extend_from_slice(&key.to_le_bytes());
                put_bits(&mut body, cache);
            }
            Frame::Delivery { header, payload } => {
                put_bits(&mut body, header);
                put_bits(&mut body, payload);
            }
            Frame::DecodeReport { user, file, matched, decoded } => {
                body.extend_from_slice(&user.to_le_bytes());
                body.extend_from_slice(&file.to_le_bytes());
                body.push(*matched as u8);
                put_bits(&mut body, decoded);
            }
        }
        let mut out = Vec::with_capacity(body.len() + 5);
        out.push(self.kind());
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(&body);
        out
    }

    /// Parses one frame; returns it with the number of octets consumed.
    pub fn decode(bytes: &[u8]) -> Result<(Frame, usize)> {
        let mut head = Reader { buf: bytes, pos: 0 };
        let kind = head.u8()?;
        let len = head.u32()? as usize;
        let body = head.take(len)?;
        let mut r = Reader { buf: body, pos: 0 };
        let frame = match kind {
            FRAME_PLACEMENT => Frame::Placement {
                user: r.u32()?,
                key: r.u64()?,
                cache: r.bits()?,
            },
            FRAME_DELIVERY => Frame::Delivery {
                header: r.bits()?,
                payload: r.bits()?,
            },
            FRAME_DECODE_REPORT => Frame::DecodeReport {
                user: r.u32()?,
                file: r.u32()?,
                matched: r.u8()? != 0,
                decoded: r.bits()?,
            },
            other => return Err(Error::Decode(format!("unknown frame type {other:#04x}"))),
        };
        if r.pos != body.len() {
            return Err(Error::Decode("trailing bytes in frame".into()));
        }
        Ok((frame, head.pos))
    }
}

/// Ordered frames of one session: placements, one broadcast, reports.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct SessionTranscript {
    pub frames: Vec<Frame>,
}

impl SessionTranscript {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.frames.iter().flat_map(Frame::encode).collect()
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let mut frames = Vec::new();
        while !bytes.is_empty() {
            let (frame, used) = Frame::decode(bytes)?;
            frames.push(frame);
            bytes = &bytes[used..];
        }
        Ok(Self { frames })
    }

    pub fn placement(&self, user: usize) -> Option<&Frame> {
        self.frames
            .iter()
            .find(|f| matches!(f, Frame::Placement { user: u, .. } if *u as usize == user))
    }

    pub fn delivery(&self) -> Option<&Frame> {
        self.frames.iter().find(|f| matches!(f, Frame::Delivery { .. }))
    }

    pub fn reports(&self) -> impl Iterator<Item = &Frame> {
        self.frames
            .iter()
            .filter(|f| matches!(f, Frame::DecodeReport { .. }))
    }

    pub fn all_match(&self) -> bool {
        self.reports()
            .all(|f| matches!(f, Frame::DecodeReport { matched: true, .. }))
    }

    /// Bytes user `user` observes: its own placement frame and the broadcast.
    pub fn user_view(&self, user: usize) -> Option<Vec<u8>> {
        let mut out = self.placement(user)?.encode();
        out.extend(self.delivery()?.encode());
        Some(out)
    }

    /// Placement frames first, then exactly one delivery, then reports.
    pub fn is_well_ordered(&self) -> bool {
        let kinds: Vec<u8> = self.frames.iter().map(Frame::kind).collect();
        let deliveries = kinds.iter().filter(|&&k| k == FRAME_DELIVERY).count();
        let mut sorted = kinds.clone();
        sorted.sort();
        deliveries == 1 && sorted == kinds
    }
}

fn unpack_header(bits: &Bits, widths: &[u32]) -> Result<Vec<u64>> {
    let total: usize = widths.iter().map(|&w| w as usize).sum();
    if total != bits.len() {
        return Err(Error::Decode(format!(
            "header has {} bits, scheme declares {total}",
            bits.len()
        )));
    }
    let mut pos = 0;
    Ok(widths
        .iter()
        .map(|&w| {
            let v = (0..w as usize).fold(0u64, |acc, b| acc | ((bits[pos + b] as u64) << b));
            pos += w as usize;
            v
        })
        .collect())
}

fn check_served(scheme: &dyn Scheme, demands: &DemandVector) -> Result<()> {
    let p = scheme.params();
    let ok = demands.len() == p.n_users
        && demands.n_files() == p.n_files
        && match scheme.privacy() {
            PrivacyClass::Private => true,
            PrivacyClass::NonPrivate(set) => set.contains(demands),
        };
    if ok {
        Ok(())
    } else {
        Err(Error::DemandNotServed(demands.clone()))
    }
}

/// Runs one session with the given realization. Users see only their own
/// placement frame, the broadcast frame and their own demand (plus the
/// demand vector for non-private schemes, where it is public).
pub fn run_session(
    scheme: &dyn Scheme,
    files: &FileStore,
    demands: &DemandVector,
    keys: &KeyAssignment,
) -> Result<SessionTranscript> {
    check_served(scheme, demands)?;
    let p = scheme.params();
    let mut transcript = SessionTranscript::default();
    for user in 0..p.n_users {
        let cache = scheme.place(user, keys, files)?;
        transcript.frames.push(Frame::Placement {
            user: user as u32,
            key: cache.key,
            cache: cache.bits,
        });
    }
    let message = scheme.deliver(files, demands, keys)?;
    transcript.frames.push(Frame::Delivery {
        header: message.header_packed(),
        payload: message.payload,
    });

    let wire = transcript.to_bytes();
    let received = SessionTranscript::from_bytes(&wire)?;
    let public_demands = (!scheme.privacy().is_private()).then_some(demands);
    let widths = scheme.header_widths();
    let mut mismatched = Vec::new();
    for user in 0..p.n_users {
        let Some(Frame::Placement { key, cache, .. }) = received.placement(user) else {
            return Err(Error::Decode(format!("no placement frame for user {user}")));
        };
        let Some(Frame::Delivery { header, payload }) = received.delivery() else {
            return Err(Error::Decode("no delivery frame".into()));
        };
        let cache = CacheContent {
            bits: cache.clone(),
            key: *key,
        };
        let message = DeliveryMessage {
            payload: payload.clone(),
            header: unpack_header(header, &widths)?,
            header_widths: widths.clone(),
        };
        let demand = demands.get(user);
        let decoded = scheme
            .decode(&UserView {
                user,
                demand,
                key: *key,
                cache: &cache,
                message: &message,
                demand_vector: public_demands,
            })
            .unwrap_or_default();
        let matched = decoded == files.file_bits(demand);
        if !matched {
            mismatched.push(user);
        }
        transcript.frames.push(Frame::DecodeReport {
            user: user as u32,
            file: demand as u32,
            matched,
            decoded,
        });
    }
    if mismatched.is_empty() {
        Ok(transcript)
    } else {
        Err(Error::SessionMismatch {
            users: mismatched,
            transcript: Box::new(transcript),
        })
    }
}

/// Session with files, keys and private randomness drawn from `seed`.
pub fn simulate_session(
    scheme: &dyn Scheme,
    demands: &DemandVector,
    seed: u64,
    width: usize,
) -> Result<SessionTranscript> {
    let p = scheme.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let files = FileStore::random(p.n_files, p.subpacketization, width, &mut rng)?;
    let keys = KeyAssignment::sample(&scheme.key_alphabet(), &scheme.private_alphabet(width), &mut rng);
    run_session(scheme, &files, demands, &keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bits_strategy() -> impl Strategy<Value = Bits> {
        prop::collection::vec(any::<bool>(), 0..70).prop_map(|v| v.into_iter().collect())
    }

    fn frame_strategy() -> impl Strategy<Value = Frame> {
        prop_oneof![
            (any::<u32>(), any::<u64>(), bits_strategy())
                .prop_map(|(user, key, cache)| Frame::Placement { user, key, cache }),
            (bits_strategy(), bits_strategy())
                .prop_map(|(header, payload)| Frame::Delivery { header, payload }),
            (any::<u32>(), any::<u32>(), any::<bool>(), bits_strategy()).prop_map(
                |(user, file, matched, decoded)| Frame::DecodeReport { user, file, matched, decoded }
            ),
        ]
    }

    proptest! {
        #[test]
        fn frames_roundtrip(frames in prop::collection::vec(frame_strategy(), 0..6)) {
            let t = SessionTranscript { frames };
            prop_assert_eq!(SessionTranscript::from_bytes(&t.to_bytes()).unwrap(), t);
        }
    }

    #[test]
    fn frame_layout_is_exact() {
        let mut cache = Bits::new();
        for b in [true, false, true] {
            cache.push(b);
        }
        let f = Frame::Placement { user: 1, key: 2, cache };
        let bytes = f.encode();
        assert_eq!(bytes[0], 0x01);
        assert_eq!(&bytes[1..5], &[17, 0, 0, 0]);
        assert_eq!(&bytes[5..9], &[1, 0, 0, 0]);
        assert_eq!(&bytes[9..17], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[17..21], &[3, 0, 0, 0]);
        assert_eq!(bytes[21], 0b101);
        assert_eq!(bytes.len(), 22);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Frame::decode(&[0x09, 0, 0, 0, 0]).is_err());
        assert!(Frame::decode(&[0x02, 9, 0, 0, 0, 1]).is_err());
    }

    #[test]
    fn header_unpacks_at_declared_widths() {
        let msg = DeliveryMessage {
            payload: Bits::new(),
            header: vec![1, 3, 0],
            header_widths: vec![1, 2, 2],
        };
        assert_eq!(unpack_header(&msg.header_packed(), &msg.header_widths).unwrap(), vec![1, 3, 0]);
    }
}
