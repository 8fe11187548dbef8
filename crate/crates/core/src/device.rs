//! Analytic HDD/SSD service-time model.

use crate::trace::{IoRequest, Op};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Device {
    Hdd,
    Ssd,
}

/// Base latencies in milliseconds, transfer rates in MB/s (10^6 bytes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceModel {
    pub ssd_read_base_ms: f64,
    pub ssd_write_base_ms: f64,
    pub hdd_random_base_ms: f64,
    pub hdd_seq_mb_per_s: f64,
    pub ssd_mb_per_s: f64,
}

impl Default for DeviceModel {
    fn default() -> Self {
        Self {
            ssd_read_base_ms: 0.10,
            ssd_write_base_ms: 0.25,
            hdd_random_base_ms: 8.0,
            hdd_seq_mb_per_s: 150.0,
            ssd_mb_per_s: 500.0,
        }
    }
}

fn transfer_ms(bytes: u64, mb_per_s: f64) -> f64 {
    bytes as f64 / (mb_per_s * 1e6) * 1e3
}

impl DeviceModel {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("ssd_read_base_ms", self.ssd_read_base_ms),
            ("ssd_write_base_ms", self.ssd_write_base_ms),
            ("hdd_random_base_ms", self.hdd_random_base_ms),
            ("hdd_seq_mb_per_s", self.hdd_seq_mb_per_s),
            ("ssd_mb_per_s", self.ssd_mb_per_s),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("device.{name} must be positive"));
            }
        }
        if self.hdd_random_base_ms <= self.ssd_read_base_ms {
            return Err("device.hdd_random_base_ms must exceed device.ssd_read_base_ms".into());
        }
        Ok(())
    }

    pub fn response_time(&self, req: &IoRequest, device: Device, sequential: bool) -> f64 {
        let bytes = req.size_bytes();
        match device {
            Device::Ssd => {
                let base = match req.op {
                    Op::Read => self.ssd_read_base_ms,
                    Op::Write => self.ssd_write_base_ms,
                };
                base + transfer_ms(bytes, self.ssd_mb_per_s)
            }
            Device::Hdd if sequential => transfer_ms(bytes, self.hdd_seq_mb_per_s),
            Device::Hdd => self.hdd_random_base_ms + transfer_ms(bytes, self.hdd_seq_mb_per_s),
        }
    }

    /// Time to copy a request's pages into the SSD on admission.
    pub fn ssd_write_time(&self, req: &IoRequest) -> f64 {
        self.ssd_write_base_ms + transfer_ms(req.size_bytes(), self.ssd_mb_per_s)
    }
}

/// A request is sequential when it starts exactly where the previous one ended.
pub fn is_sequential(prev: Option<&IoRequest>, cur: &IoRequest) -> bool {
    prev.is_some_and(|p| cur.page_id == p.end_page())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn req(page: u64, size: u32, op: Op) -> IoRequest {
        IoRequest::new(0, page, size, op)
    }

    #[test]
    fn default_substitutions() {
        let m = DeviceModel::default();
        let r = req(0, 1, Op::Read);
        let hdd = m.response_time(&r, Device::Hdd, false);
        assert!((hdd - (8.0 + 4096.0 / 150e6 * 1e3)).abs() < 1e-12);
        assert!((hdd - 8.027).abs() < 1e-3);
        let ssd = m.response_time(&r, Device::Ssd, false);
        assert!((ssd - (0.10 + 4096.0 / 500e6 * 1e3)).abs() < 1e-12);
        assert!((ssd - 0.108).abs() < 1e-3);
        let seq = m.response_time(&r, Device::Hdd, true);
        assert!((seq - 4096.0 / 150e6 * 1e3).abs() < 1e-12);
        let w = m.response_time(&req(0, 1, Op::Write), Device::Ssd, false);
        assert!((w - (0.25 + 4096.0 / 500e6 * 1e3)).abs() < 1e-12);
    }

    #[test]
    fn sequentiality() {
        let prev = req(10, 2, Op::Read);
        assert!(is_sequential(Some(&prev), &req(12, 1, Op::Read)));
        assert!(!is_sequential(Some(&prev), &req(14, 1, Op::Read)));
        assert!(!is_sequential(None, &req(12, 1, Op::Read)));
    }

    #[test]
    fn validation() {
        assert!(DeviceModel::default().validate().is_ok());
        let bad = DeviceModel {
            hdd_random_base_ms: 0.05,
            ..DeviceModel::default()
        };
        assert!(bad.validate().is_err());
        let bad = DeviceModel {
            ssd_mb_per_s: 0.0,
            ..DeviceModel::default()
        };
        assert!(bad.validate().unwrap_err().contains("ssd_mb_per_s"));
    }

    proptest! {
        #[test]
        fn hdd_random_slower_than_ssd(size in 1u32..4096, read in any::<bool>()) {
            let m = DeviceModel::default();
            let r = req(0, size, if read { Op::Read } else { Op::Write });
            prop_assert!(m.response_time(&r, Device::Hdd, false) > m.response_time(&r, Device::Ssd, false));
        }

        #[test]
        fn monotonic_in_size(size in 1u32..4096, read in any::<bool>(), seq in any::<bool>()) {
            let m = DeviceModel::default();
            let op = if read { Op::Read } else { Op::Write };
            for dev in [Device::Hdd, Device::Ssd] {
                let small = m.response_time(&req(0, size, op), dev, seq);
                let big = m.response_time(&req(0, size + 1, op), dev, seq);
                prop_assert!(big >= small);
                prop_assert!(small > 0.0);
            }
        }
    }
}
