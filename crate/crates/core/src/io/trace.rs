//! Loss traces as CSV with header `iter,total,yamaguchi,power`.

use std::path::Path;

use super::{read_file, write_file, IoError};
use crate::pretrain::LossRecord;

pub fn encode_loss_csv(trace: &[LossRecord]) -> Result<Vec<u8>, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in trace {
        w.serialize(r).map_err(|e| IoError::Malformed(e.to_string()))?;
    }
    w.into_inner().map_err(|e| IoError::Malformed(e.to_string()))
}

pub fn decode_loss_csv(bytes: &[u8]) -> Result<Vec<LossRecord>, IoError> {
    csv::Reader::from_reader(bytes)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| IoError::Malformed(e.to_string()))
}

pub fn write_loss_csv(trace: &[LossRecord], path: &Path) -> Result<(), IoError> {
    write_file(path, &encode_loss_csv(trace)?)
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRecord>, IoError> {
    decode_loss_csv(&read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = vec![
            LossRecord { iter: 1, total: 4.205_612_345_678_9, yamaguchi: 0.1 + 0.2, power: 1e-300 },
            LossRecord { iter: 2, total: 1.0, yamaguchi: 0.5, power: 5.0 },
        ];
        let bytes = encode_loss_csv(&t).unwrap();
        assert!(bytes.starts_with(b"iter,total,yamaguchi,power\n"));
        assert_eq!(decode_loss_csv(&bytes).unwrap(), t);
    }
}
