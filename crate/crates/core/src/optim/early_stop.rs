/// Outcome of feeding one validation loss to [`EarlyStopping`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Keeps the snapshot with the lowest validation loss seen so far.
///
/// Only a strictly lower loss counts as an improvement. Training should stop
/// once `patience` consecutive epochs went by without one.
#[derive(Debug, Clone)]
pub struct EarlyStopping<T> {
    patience: usize,
    best_loss: f64,
    best: Option<T>,
    best_epoch: usize,
    epochs_seen: usize,
    since_improve: usize,
}

impl<T: Clone> EarlyStopping<T> {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best: None,
            best_epoch: 0,
            epochs_seen: 0,
            since_improve: 0,
        }
    }

    pub fn update(&mut self, validation_loss: f64, snapshot: &T) -> StopDecision {
        self.epochs_seen += 1;
        if validation_loss < self.best_loss {
            self.best_loss = validation_loss;
            self.best = Some(snapshot.clone());
            self.best_epoch = self.epochs_seen;
            self.since_improve = 0;
        } else {
            self.since_improve += 1;
        }
        if self.since_improve > 0 && self.since_improve >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    /// 1-based epoch of the best snapshot (0 before any update).
    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> Option<&T> {
        self.best.as_ref()
    }

    pub fn into_best(self) -> Option<T> {
        self.best
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.since_improve
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stops_after_patience_without_improvement() {
        let mut es = EarlyStopping::new(2);
        let losses = [3.0, 2.0, 2.0, 2.0];
        let decisions: Vec<_> = losses
            .iter()
            .enumerate()
            .map(|(epoch, &l)| es.update(l, &(epoch + 1)))
            .collect();
        assert_eq!(
            decisions,
            vec![
                StopDecision::Continue,
                StopDecision::Continue,
                StopDecision::Continue,
                StopDecision::Stop
            ]
        );
        assert_eq!(es.best(), Some(&2));
        assert_eq!(es.best_epoch(), 2);
    }

    #[test]
    fn decreasing_losses_never_stop() {
        let mut es = EarlyStopping::new(1);
        for epoch in 0..100 {
            let d = es.update(100.0 - epoch as f64, &epoch);
            assert_eq!(d, StopDecision::Continue);
        }
        assert_eq!(es.best(), Some(&99));
    }

    #[test]
    fn ties_do_not_reset_patience() {
        let mut es = EarlyStopping::new(3);
        es.update(1.0, &"first");
        es.update(1.0, &"tie");
        es.update(1.0, &"tie");
        assert_eq!(es.epochs_since_improvement(), 2);
        assert_eq!(es.best(), Some(&"first"));
        assert_eq!(es.update(1.0, &"tie"), StopDecision::Stop);
    }
}
