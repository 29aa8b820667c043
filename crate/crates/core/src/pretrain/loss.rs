use ndarray::Array2;

use super::PretrainError;
use crate::autodiff::{Matrix, Tape, Var};

/// Mean binary cross-entropy of the Yamaguchi maps against `labels`
/// (`4 x T`, entries 0 or 1), from the head logits.
pub fn loss_yamaguchi(tape: &mut Tape, logits: Var, labels: &Matrix) -> Result<Var, PretrainError> {
    if tape.shape(logits) != labels.dim() {
        return Err(PretrainError::Shape(format!(
            "yamaguchi maps {:?} vs labels {:?}",
            tape.shape(logits),
            labels.dim()
        )));
    }
    Ok(tape.bce_with_logits(logits, labels)?)
}

/// Power adapter and its loss. The reconstructed power `p_hat` (`1 x T`) is
/// the column sum of the decomposition maps; the loss is the mean squared
/// error against `span` (`1 x T`). Returns `(p_hat, loss)`.
pub fn loss_power(tape: &mut Tape, decomposition: Var, span: &Matrix) -> Result<(Var, Var), PretrainError> {
    let (k, t) = tape.shape(decomposition);
    if span.dim() != (1, t) {
        return Err(PretrainError::Shape(format!("span {:?} vs {t} tokens", span.dim())));
    }
    let ones = tape.constant(Array2::ones((1, k)));
    let p_hat = tape.matmul(ones, decomposition)?;
    let target = tape.constant(span.clone());
    let diff = tape.sub(p_hat, target)?;
    let sq = tape.mul(diff, diff)?;
    Ok((p_hat, tape.mean(sq)?))
}

/// `ly + alpha * lp`.
pub fn total_loss(tape: &mut Tape, ly: Var, lp: Var, alpha: f64) -> Result<Var, PretrainError> {
    let weighted = tape.scale(lp, alpha)?;
    Ok(tape.add(ly, weighted)?)
}

pub fn total_loss_value(ly: f64, lp: f64, alpha: f64) -> f64 {
    ly + alpha * lp
}
