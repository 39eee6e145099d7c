//! Link models: a TDMA/FDD superframe with frequency hopping and
//! flooding-style time synchronization, a BLE-baseline link quantized to the
//! connection interval, and per-channel Gilbert–Elliott loss.

mod channel;
mod clock;
mod link;
mod mac;

pub use channel::{ChannelModel, GilbertElliott};
pub use clock::{advance_clock, sync_epoch, ClockState};
pub use link::{latency_distribution, DeliveryOutcome, DeliveryStatus, LatencySummary, Link, LinkStreams, ReadyPhase};
pub use mac::{build_superframe, hop_channel, ChannelId, Direction, MacConfig, MacVariant, Slot, SlotSpec, Superframe};
