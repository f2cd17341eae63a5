//! Statement scripts that deploy the three islands.
//!
//! Placeholders of the published statements are filled in here: intake
//! addresses bind to ephemeral ports on 127.0.0.1 and every channel gets the
//! experiment period.

use std::time::Duration;

/// The sample tweet author, registered with three weapons.
pub const SAMPLE_UID: i64 = 73;

pub const EVENT_ID: &str = "82e61d25-4cad-0632-3d8d-148e71cb50bf";
pub const EVENT_CENTER: (f64, f64) = (33.66100302712824, -117.83950620703125);
pub const EVENT_RADIUS_KM: f64 = 3.57746886883645;

pub const BUILDING_ID: &str = "82e61d25-43ad-0632-45d0-0ba5366832d9";
/// Student Center corners.
pub const BUILDING_AREA: ((f64, f64), (f64, f64)) = (
    (33.64811430275051, -117.84332027249145),
    (33.649382536086605, -117.84153928570557),
);

/// Security stations 0 and 1 sit where the sample alert places them; the
/// other three are farther from the Student Center.
pub const STATIONS: [(f64, f64); 5] = [
    (33.646866723393266, -117.84170161534618),
    (33.64792551859947, -117.84013290702327),
    (33.64371, -117.84498),
    (33.65202, -117.83785),
    (33.64549, -117.83411),
];

/// First officer location; the rest start at seeded positions.
pub const OFFICER_ZERO: (f64, f64) = (33.62672144902342, -117.8848436908583);

/// The sample raw tweet, posted inside the Student Center.
pub const SAMPLE_TWEET: &str = r#"{"tid": 1593142018123, "uid": 73, "area_name": "UCI", "text": "Saul Goodman builds SKS, and Todd Alquist fires AK47, but Skyler White sells Cabbage.", "coordinates": [33.64921228736088, -117.84181977473024], "created_at": 1593142018123}"#;

/// `PT<seconds>S` for a channel PERIOD.
pub fn iso_period(period: Duration) -> String {
    format!("PT{}S", period.as_millis() as f64 / 1000.0)
}

pub fn dhs(period: Duration) -> String {
    let p = iso_period(period);
    format!(
        r#"USE dhs;
CREATE TYPE Tweet AS {{ tid: bigint, uid: bigint, text: string }};
CREATE ACTIVE DATASET Tweets(Tweet) PRIMARY KEY tid;
CREATE FEED TweetFeed WITH {{
  "type-name" : "Tweet",
  "adapter-name": "socket_adapter",
  "format" : "JSON",
  "sockets": "127.0.0.1:0",
  "address-type": "IP",
  "dynamic": true }};
CREATE TYPE WeaponRegistration AS
  {{ wrid: uuid, uid: bigint, weapon_name: string }};
CREATE DATASET WeaponRegistrations(WeaponRegistration)
  PRIMARY KEY wrid AUTOGENERATED;
INSERT INTO WeaponRegistrations [
  {{ "uid": {SAMPLE_UID}, "weapon_name": "AR10" }},
  {{ "uid": {SAMPLE_UID}, "weapon_name": "AK47" }},
  {{ "uid": {SAMPLE_UID}, "weapon_name": "GLOCK21" }} ];
CREATE FUNCTION EnrichTweet(tweet) {{
  object_merge(tweet, {{
    "timestamp" : datetime_from_unix_time_in_ms(tweet.created_at),
    "location" :
       create_point(tweet.coordinates[0],tweet.coordinates[1]),
    "threatening_rating" : threateningRating(tweet.text),
    "user_registered_weapon": (SELECT VALUE w.weapon_name
       FROM WeaponRegistrations w WHERE w.uid = tweet.uid)}})
}};
CONNECT FEED TweetFeed to DATASET Tweets APPLY FUNCTION EnrichTweet;
START FEED TweetFeed;
CREATE CONTINUOUS PUSH CHANNEL ThreateningTweetsAt(area_name)
 PERIOD duration("{p}") {{
  SELECT t.area_name, t.text, t.location, t.threatening_rating,
    t.user_registered_weapon FROM Tweets t
  WHERE t.area_name = area_name
    AND t.threatening_rating > 0 AND is_new(t) }};
"#
    )
}

fn bridge(dhs_host: &str, params: &str) -> String {
    format!(
        r#"CREATE TYPE LocalThreateningTweet AS
  {{ channelExecutionEpochTime: bigint,
    dataverseName: string, channelName: string }};
CREATE ACTIVE DATASET LocalThreateningTweets(LocalThreateningTweet)
 PRIMARY KEY channelExecutionEpochTime;
CREATE FEED LocalThreateningTweetFeed WITH {{
  "adapter-name" : "http_adapter",
  "addresses" : "127.0.0.1:0",
  "address-type" : "IP",
  "type-name" : "LocalThreateningTweet",
  "format" : "adm",
  "bad-host" : "{dhs_host}",
  "bad-channel" : "ThreateningTweetsAt",
  "bad-channel-parameters": "{params}",
  "bad-dataverse": "dhs",
  "dynamic": false }};
CONNECT FEED LocalThreateningTweetFeed
  TO DATASET LocalThreateningTweets;
START FEED LocalThreateningTweetFeed;
"#
    )
}

pub fn ocsd(period: Duration, dhs_host: &str) -> String {
    let p = iso_period(period);
    let (ex, ey) = EVENT_CENTER;
    format!(
        r#"USE ocsd;
{bridge}
CREATE TYPE OfficerLocation AS {{ oid: int, location: point }};
CREATE ACTIVE DATASET OfficerLocations(OfficerLocation)
  PRIMARY KEY oid;
CREATE FEED LocationFeed WITH {{
  "adapter-name" : "http_adapter",
  "addresses" : "127.0.0.1:0",
  "type-name" : "OfficerLocation",
  "format" : "JSON" }};
CONNECT FEED LocationFeed TO DATASET OfficerLocations;
START FEED LocationFeed;
CREATE TYPE Event AS {{ eid: uuid, name: string, location: point,
  event_duration: duration, radius_km: double }};
CREATE DATASET Events(Event) PRIMARY KEY eid;
INSERT INTO Events {{ "eid": uuid("{EVENT_ID}"), "name": "OC Marathon",
  "location": create_point({ex}, {ey}),
  "event_duration": duration("PT10S"), "radius_km": {EVENT_RADIUS_KM} }};
CREATE CONTINUOUS PUSH CHANNEL ThreateningEventsNear(oid)
 PERIOD duration("{p}") {{
  FROM LocalThreateningTweets tn, OfficerLocations o, Events e
  UNNEST tn.results threatening_tweet
  LET tweet_loc = threatening_tweet.result.location,
  officer_tweet_dist = spatial_distance(o.location, tweet_loc),
  event_tweet_dist = spatial_distance(e.location, tweet_loc),
  officer_event_dist = spatial_distance(o.location, e.location)
    WHERE is_new(tn) AND oid = o.oid AND officer_tweet_dist < 0.1
      AND event_tweet_dist < e.radius_km / 100
  SELECT oid, threatening_tweet.result tweet_content, e event_info,
    officer_tweet_dist * 100 as tweet_distance_km,
    officer_event_dist * 100 as event_distance_km
}};
"#,
        bridge = bridge(dhs_host, r#"\"OC\";\"UCI\""#),
    )
}

pub fn uci(period: Duration, dhs_host: &str) -> String {
    let p = iso_period(period);
    let ((x1, y1), (x2, y2)) = BUILDING_AREA;
    let stations: Vec<String> = STATIONS
        .iter()
        .enumerate()
        .map(|(i, (x, y))| {
            format!(
                r#"{{ "sid": {i}, "location": create_point({x}, {y}), "name": "Station # {i}" }}"#
            )
        })
        .collect();
    format!(
        r#"USE uci;
{bridge}
CREATE TYPE Building AS {{ bid: uuid, name: string }};
CREATE TYPE SecurityStation AS {{ sid: bigint, location: point }};
CREATE DATASET Buildings(Building) PRIMARY KEY bid AUTOGENERATED;
CREATE DATASET SecurityStations(SecurityStation) PRIMARY KEY sid;
INSERT INTO Buildings {{ "bid": uuid("{BUILDING_ID}"), "name": "Student Center",
  "area": rectangle("{x1}, {y1} {x2},{y2}") }};
INSERT INTO SecurityStations [
  {stations} ];
CREATE CONTINUOUS PUSH CHANNEL AlertsOnCampus()
 PERIOD duration("{p}") {{
  FROM LocalThreateningTweets tn, Buildings b
  UNNEST tn.results threatening_tweet
  LET tweet_loc = threatening_tweet.result.location,
    station_dist = (FROM SecurityStations s
      LET dist = spatial_distance(tweet_loc, s.location)
      SELECT s stationInfo, dist * 100 dist_km ORDER BY dist)
  WHERE is_new(tn) AND spatial_intersect(tweet_loc, b.area)
  SELECT threatening_tweet.result tweet_content,
    b building_info, station_dist
}};
"#,
        bridge = bridge(dhs_host, r#"\"UCI\""#),
        stations = stations.join(",\n  "),
    )
}

/// Creates a general broker and `count` subscriptions on it.
/// `args(i)` renders the argument list of subscription `i`.
pub fn subscriptions(
    dv: &str,
    broker: &str,
    url: &str,
    channel: &str,
    count: usize,
    args: impl Fn(usize) -> String,
) -> String {
    let mut s = format!(
        "USE {dv};\nCREATE BROKER {broker} AT \"{url}\" WITH {{ \"broker-type\": \"general\" }};\n"
    );
    for i in 0..count {
        s.push_str(&format!(
            "SUBSCRIBE TO {channel}({}) ON {broker};\n",
            args(i)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddl::parse_statements;

    #[test]
    fn scripts_parse() {
        let p = Duration::from_millis(1500);
        assert_eq!(iso_period(p), "PT1.5S");
        for s in [
            dhs(p),
            ocsd(p, "127.0.0.1:1"),
            uci(p, "127.0.0.1:1"),
            subscriptions("uci", "B", "http://x/", "AlertsOnCampus", 3, |_| {
                String::new()
            }),
        ] {
            parse_statements(&s).unwrap_or_else(|e| panic!("{e}\n{s}"));
        }
    }
}
