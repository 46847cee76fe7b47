//! Closed-form throughput, delay and stability orders, batch-queue delay
//! formulas and curve fitting.

mod fit;
mod orders;
mod queueing;

pub use fit::{linear_fit, loglog_order_fit, LinearFit, OrderFit};
pub use orders::{
    ddf_case, ddf_delay_order, ddf_forward_time_order, ddf_service_time_order, ddf_throughput_order, obdwf_delay_order,
    obdwf_throughput_bound, stability_gain_order, zeta_order, DdfCase, DdfThroughputOrder, OrderParams,
};
pub use queueing::{
    mx_g1_wait, pgf_mean_system, simulate_batch_queue, BatchQueueStats, PgfSpec, ServiceLaw, ServiceMoments,
};
