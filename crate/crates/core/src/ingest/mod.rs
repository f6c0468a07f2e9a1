//! Reading and writing CSV exports, block-range slicing, and historical
//! balance reconstruction.

mod export;
mod ledger;
mod slice;

pub use export::{read_export, table_file, write_export, ExportError, ExportManifest, RawDataset, BALANCES_FILE, MANIFEST_FILE};
pub use ledger::{BalanceLedger, LedgerWarning};
pub use slice::{extract_slice, SliceError, SliceOutput};
