//! Tick parsing, minute bars, intraday returns and per-stock attributes.

mod bars;
mod calendar;
mod profile;
mod returns;
mod tick;

pub use bars::{
    build_minute_bars, compute_minute_traded_value, MinuteBar, MinuteSeries, TradingDay,
};
pub use calendar::{MinuteSlot, SessionCalendar, SessionWindow};
pub use profile::{
    compute_profile, read_profiles, read_shares, write_profiles, write_shares, StockProfile,
};
pub use returns::{
    compute_intraday_returns, read_returns_dir, standardize, write_returns_csv, write_returns_dir,
    ReturnSeries,
};
pub use tick::{read_ticks, read_ticks_file, write_ticks, TradeTick, TIMESTAMP_FORMAT};
