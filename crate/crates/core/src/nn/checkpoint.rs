//! Little-endian binary format for networks and agents.
//!
//! Network: magic `AACNET01`, `u32` layer count `L`, `u32` activation tag,
//! `L + 1` `u32` widths, then per layer the weights (`out × in`, row-major)
//! followed by the bias, all `f64`.
//!
//! Agent: magic `AACAGT01`, `u32` network count, each network as above, then
//! the `f64` log-temperature.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use super::mlp::{Activation, Dense, MlpParameters};
use crate::error::{AacError, Result};

pub const NETWORK_MAGIC: &[u8; 8] = b"AACNET01";
pub const AGENT_MAGIC: &[u8; 8] = b"AACAGT01";
const MAX_WIDTH: u32 = 1 << 20;
const MAX_LAYERS: u32 = 64;

fn bad(msg: impl Into<String>) -> AacError {
    AacError::Checkpoint(msg.into())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| bad(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 8];
    r.read_exact(&mut bytes).map_err(|e| bad(format!("truncated payload: {e}")))?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn read_magic<R: Read>(r: &mut R, expected: &[u8; 8]) -> Result<()> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| bad(format!("missing magic: {e}")))?;
    if &magic != expected {
        return Err(bad(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(expected)
        )));
    }
    Ok(())
}

pub fn write_network<W: Write>(w: &mut W, net: &MlpParameters) -> Result<()> {
    w.write_all(NETWORK_MAGIC)?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    w.write_all(&net.activation.tag().to_le_bytes())?;
    for width in net.sizes() {
        w.write_all(&(width as u32).to_le_bytes())?;
    }
    for t in net.tensors() {
        for v in t {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut R) -> Result<MlpParameters> {
    read_magic(r, NETWORK_MAGIC)?;
    let layers = read_u32(r)?;
    if layers == 0 || layers > MAX_LAYERS {
        return Err(bad(format!("implausible layer count {layers}")));
    }
    let tag = read_u32(r)?;
    let activation = Activation::from_tag(tag).ok_or_else(|| bad(format!("unknown activation tag {tag}")))?;
    let mut widths = Vec::with_capacity(layers as usize + 1);
    for _ in 0..=layers {
        let w = read_u32(r)?;
        if w == 0 || w > MAX_WIDTH {
            return Err(bad(format!("implausible layer width {w}")));
        }
        widths.push(w as usize);
    }
    let mut dense = Vec::with_capacity(layers as usize);
    for pair in widths.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let weights = Array2::from_shape_vec((fan_out, fan_in), read_f64s(r, fan_in * fan_out)?)
            .map_err(|e| bad(e.to_string()))?;
        let bias = Array1::from_vec(read_f64s(r, fan_out)?);
        dense.push(Dense { weights, bias });
    }
    let net = MlpParameters {
        layers: dense,
        activation,
    };
    if !net.is_finite() {
        return Err(bad("non-finite parameter"));
    }
    Ok(net)
}

pub fn write_agent<W: Write>(w: &mut W, networks: &[&MlpParameters], log_alpha: f64) -> Result<()> {
    w.write_all(AGENT_MAGIC)?;
    w.write_all(&(networks.len() as u32).to_le_bytes())?;
    for net in networks {
        write_network(w, net)?;
    }
    w.write_all(&log_alpha.to_le_bytes())?;
    Ok(())
}

pub fn read_agent<R: Read>(r: &mut R) -> Result<(Vec<MlpParameters>, f64)> {
    read_magic(r, AGENT_MAGIC)?;
    let count = read_u32(r)?;
    if count == 0 || count > 16 {
        return Err(bad(format!("implausible network count {count}")));
    }
    let nets = (0..count).map(|_| read_network(r)).collect::<Result<Vec<_>>>()?;
    let log_alpha = read_f64s(r, 1)?[0];
    if !log_alpha.is_finite() {
        return Err(bad("non-finite log temperature"));
    }
    Ok((nets, log_alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn network_round_trip_is_bit_exact() {
        let net = MlpParameters::new(&[5, 7, 3], Activation::Silu, &mut ChaCha8Rng::seed_from_u64(4));
        let mut buf = Vec::new();
        write_network(&mut buf, &net).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 3 * 4 + net.num_parameters() * 8);
        let back = read_network(&mut buf.as_slice()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn agent_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = MlpParameters::new(&[2, 4, 2], Activation::Selu, &mut rng);
        let b = MlpParameters::new(&[3, 4, 1], Activation::Selu, &mut rng);
        let mut buf = Vec::new();
        write_agent(&mut buf, &[&a, &b], -1.25).unwrap();
        let (nets, la) = read_agent(&mut buf.as_slice()).unwrap();
        assert_eq!(nets, vec![a, b]);
        assert_eq!(la, -1.25);
    }

    #[test]
    fn corrupted_input_rejected() {
        let net = MlpParameters::zeros(&[2, 2], Activation::Selu);
        let mut buf = Vec::new();
        write_network(&mut buf, &net).unwrap();
        let mut wrong_magic = buf.clone();
        wrong_magic[0] = b'X';
        assert!(read_network(&mut wrong_magic.as_slice()).is_err());
        let truncated = &buf[..buf.len() - 3];
        assert!(read_network(&mut &truncated[..]).is_err());
        let mut bad_tag = buf.clone();
        bad_tag[12] = 9;
        assert!(read_network(&mut bad_tag.as_slice()).is_err());
    }
}
