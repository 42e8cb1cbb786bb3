//! Wire codec, transports, the eavesdropper tap and the two-party drivers.

pub mod codec;
pub mod exchange;
pub mod tap;
pub mod transport;
pub mod trope;

pub use codec::{decode_msg, encode_msg, CodecError, Message, MessageKind, ProtocolId};
pub use exchange::{run_exchange, run_pair, run_pair_with, ExchangeConfig, Recovered, Role, SessionError, SessionOutcome};
pub use tap::{tap_attach, tap_attach_active, Direction, TapEntry, TapLog, Tamper, Tapped};
pub use transport::{MemoryTransport, TcpTransport, Transport, TransportError};
pub use trope::{run_trope_session, trope_alice, trope_bob, Manifest, TropeAlice, TropeBob, TropeConfig};
