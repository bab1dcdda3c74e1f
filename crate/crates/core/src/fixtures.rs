//! The two small markets used throughout the tests and the demo.

use crate::market::{FundingPolicy, Market, RawCollege, RawMarket, RawStudent, Terms};

use Terms::{SelfFunded, StateFunded};

/// One college with a state seat and a self-funded seat; a rich student `r`
/// who takes either seat and a poor student `p` who only takes state funding.
pub fn ex1_raw() -> RawMarket {
    RawMarket {
        students: vec![
            RawStudent::new("r", &[("c", StateFunded), ("c", SelfFunded)]),
            RawStudent::new("p", &[("c", StateFunded)]),
        ],
        colleges: vec![RawCollege::new("c", 1, 1, &["r", "p"], FundingPolicy::InverseMerit)],
    }
}

pub fn ex1() -> Market {
    Market::validate(ex1_raw()).expect("ex1 is valid")
}

/// Three students and two colleges where moving away from deferred
/// acceptance leaves the lowest-ranked student `g` unassigned.
pub fn ex2_raw() -> RawMarket {
    RawMarket {
        students: vec![
            RawStudent::new("r", &[("h", StateFunded), ("h", SelfFunded)]),
            RawStudent::new("p", &[("h", StateFunded), ("c", StateFunded)]),
            RawStudent::new("g", &[("h", StateFunded), ("h", SelfFunded)]),
        ],
        colleges: vec![
            RawCollege::new("h", 1, 1, &["r", "p", "g"], FundingPolicy::InverseMerit),
            RawCollege::new("c", 1, 0, &["r", "p", "g"], FundingPolicy::InverseMerit),
        ],
    }
}

pub fn ex2() -> Market {
    Market::validate(ex2_raw()).expect("ex2 is valid")
}
