//! Wall-clock latency with warmup. Measurement is strictly sequential.

use std::time::Duration;

use web_time::Instant;

use crate::error::{Error, Result};

/// Calls made before timing starts; their results are discarded.
pub const DEFAULT_WARMUP: usize = 5;

/// Source of timestamps, as offsets from an arbitrary origin.
pub trait Clock {
    fn now(&mut self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&mut self) -> Duration {
        self.origin.elapsed()
    }
}

fn interval(start: Duration, end: Duration) -> Result<Duration> {
    end.checked_sub(start).ok_or_else(|| {
        Error::Measurement(format!(
            "clock went backwards ({start:?} then {end:?})"
        ))
    })
}

#[derive(Debug)]
pub struct Timed<T> {
    /// One output per input, in input order.
    pub outputs: Vec<Result<T>>,
    /// Wall time of each call in milliseconds, paired with `outputs`.
    pub per_sample_ms: Vec<f64>,
    /// Wall time of the whole timed loop.
    pub total: Duration,
}

pub fn measure_latency<I, T, F>(f: F, inputs: &[I], warmup: usize) -> Result<Timed<T>>
where
    F: FnMut(&I) -> Result<T>,
{
    measure_latency_with(&mut MonotonicClock::new(), f, inputs, warmup)
}

pub fn measure_latency_with<C, I, T, F>(
    clock: &mut C,
    mut f: F,
    inputs: &[I],
    warmup: usize,
) -> Result<Timed<T>>
where
    C: Clock,
    F: FnMut(&I) -> Result<T>,
{
    if !inputs.is_empty() {
        for i in 0..warmup {
            let _ = f(&inputs[i % inputs.len()]);
        }
    }
    let mut outputs = Vec::with_capacity(inputs.len());
    let mut per_sample_ms = Vec::with_capacity(inputs.len());
    let loop_start = clock.now();
    for input in inputs {
        let t0 = clock.now();
        let out = f(input);
        let t1 = clock.now();
        per_sample_ms.push(interval(t0, t1)?.as_secs_f64() * 1e3);
        outputs.push(out);
    }
    let total = interval(loop_start, clock.now())?;
    Ok(Timed {
        outputs,
        per_sample_ms,
        total,
    })
}

/// Times one call of `f` after `warmup` discarded calls.
pub fn measure_batch_latency<T, F>(f: F, warmup: usize) -> Result<(T, Duration)>
where
    F: FnMut() -> Result<T>,
{
    measure_batch_latency_with(&mut MonotonicClock::new(), f, warmup)
}

pub fn measure_batch_latency_with<C, T, F>(clock: &mut C, mut f: F, warmup: usize) -> Result<(T, Duration)>
where
    C: Clock,
    F: FnMut() -> Result<T>,
{
    for _ in 0..warmup {
        let _ = f();
    }
    let t0 = clock.now();
    let out = f()?;
    let t1 = clock.now();
    Ok((out, interval(t0, t1)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Scripted(Vec<u64>);

    impl Clock for Scripted {
        fn now(&mut self) -> Duration {
            Duration::from_millis(self.0.remove(0))
        }
    }

    #[test]
    fn sleeping_stub_measures_near_its_sleep() {
        let inputs = vec![(); 10];
        let t = measure_latency(
            |_| {
                std::thread::sleep(Duration::from_millis(5));
                Ok(())
            },
            &inputs,
            DEFAULT_WARMUP,
        )
        .unwrap();
        let mean = t.per_sample_ms.iter().sum::<f64>() / t.per_sample_ms.len() as f64;
        assert!((5.0..=15.0).contains(&mean), "mean {mean} ms");
        let max = t.per_sample_ms.iter().cloned().fold(0.0, f64::max);
        assert!(t.total.as_secs_f64() * 1e3 >= max);
    }

    #[test]
    fn warmup_calls_are_excluded() {
        let mut calls = 0;
        let t = measure_latency(
            |x: &i32| {
                calls += 1;
                Ok(*x * 2)
            },
            &[1, 2, 3],
            5,
        )
        .unwrap();
        assert_eq!(calls, 8);
        let outs: Vec<i32> = t.outputs.into_iter().map(|o| o.unwrap()).collect();
        assert_eq!(outs, vec![2, 4, 6]);
        assert_eq!(t.per_sample_ms.len(), 3);
    }

    #[test]
    fn failures_are_kept_in_place() {
        let t = measure_latency(
            |x: &i32| if *x == 2 { Err(Error::numeric("boom")) } else { Ok(*x) },
            &[1, 2, 3],
            0,
        )
        .unwrap();
        assert!(t.outputs[0].is_ok() && t.outputs[1].is_err() && t.outputs[2].is_ok());
    }

    #[test]
    fn backwards_clock_is_a_measurement_error() {
        let mut clock = Scripted(vec![10, 20, 15]);
        let r = measure_latency_with(&mut clock, |_: &()| Ok(()), &[()], 0);
        assert!(matches!(r, Err(Error::Measurement(_))));
        let mut clock = Scripted(vec![30, 29]);
        let r = measure_batch_latency_with(&mut clock, || Ok(()), 0);
        assert!(matches!(r, Err(Error::Measurement(_))));
    }

    #[test]
    fn scripted_clock_readings_become_milliseconds() {
        let mut clock = Scripted(vec![0, 1, 4, 4, 6, 9]);
        let t = measure_latency_with(&mut clock, |_: &()| Ok(()), &[(), ()], 0).unwrap();
        assert_eq!(t.per_sample_ms, vec![3.0, 2.0]);
        assert_eq!(t.total, Duration::from_millis(9));
    }
}
