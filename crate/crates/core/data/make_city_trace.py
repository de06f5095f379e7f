"""Regenerates cities.csv and weights.csv.

RTTs are derived from great-circle distance: fibre at 200 km/msec, a route
inflation factor, a fixed access cost, and a little seeded noise so the
matrix is not exactly symmetric (the loader averages the two directions).
Weights are rough relative full-node counts per metro area.
"""

import csv
import math
import random

CITIES = [
    # name, lat, lon, weight
    ("Ashburn", 39.04, -77.49, 9.0),
    ("NewYork", 40.71, -74.01, 6.0),
    ("Chicago", 41.88, -87.63, 3.0),
    ("Dallas", 32.78, -96.80, 2.5),
    ("Atlanta", 33.75, -84.39, 2.0),
    ("Miami", 25.76, -80.19, 1.5),
    ("Denver", 39.74, -104.99, 1.0),
    ("LosAngeles", 34.05, -118.24, 3.5),
    ("SanFrancisco", 37.77, -122.42, 4.5),
    ("Seattle", 47.61, -122.33, 2.0),
    ("Toronto", 43.65, -79.38, 2.0),
    ("Montreal", 45.50, -73.57, 1.5),
    ("Vancouver", 49.28, -123.12, 1.0),
    ("MexicoCity", 19.43, -99.13, 0.5),
    ("SaoPaulo", -23.55, -46.63, 1.0),
    ("BuenosAires", -34.60, -58.38, 0.5),
    ("London", 51.51, -0.13, 5.0),
    ("Amsterdam", 52.37, 4.90, 5.0),
    ("Frankfurt", 50.11, 8.68, 7.0),
    ("Paris", 48.86, 2.35, 4.0),
    ("Berlin", 52.52, 13.40, 3.0),
    ("Zurich", 47.38, 8.54, 1.5),
    ("Stockholm", 59.33, 18.07, 1.5),
    ("Helsinki", 60.17, 24.94, 2.0),
    ("Warsaw", 52.23, 21.01, 1.0),
    ("Prague", 50.08, 14.44, 1.0),
    ("Vienna", 48.21, 16.37, 1.0),
    ("Madrid", 40.42, -3.70, 1.0),
    ("Milan", 45.46, 9.19, 1.0),
    ("Moscow", 55.76, 37.62, 2.0),
    ("Kyiv", 50.45, 30.52, 0.5),
    ("Istanbul", 41.01, 28.98, 0.5),
    ("TelAviv", 32.09, 34.78, 0.5),
    ("Dubai", 25.20, 55.27, 0.5),
    ("Johannesburg", -26.20, 28.05, 0.5),
    ("Mumbai", 19.08, 72.88, 0.5),
    ("Bangalore", 12.97, 77.59, 0.5),
    ("Singapore", 1.35, 103.82, 2.0),
    ("HongKong", 22.32, 114.17, 2.0),
    ("Shanghai", 31.23, 121.47, 1.0),
    ("Beijing", 39.90, 116.41, 1.0),
    ("Seoul", 37.57, 126.98, 1.5),
    ("Tokyo", 35.68, 139.69, 2.5),
    ("Taipei", 25.03, 121.57, 0.5),
    ("Sydney", -33.87, 151.21, 1.0),
    ("Melbourne", -37.81, 144.96, 0.5),
    ("Auckland", -36.85, 174.76, 0.3),
    ("Jakarta", -6.21, 106.85, 0.3),
]

EARTH_KM = 6371.0
FIBRE_KM_PER_MSEC = 200.0
INFLATION = 1.6
ACCESS_MSEC = 4.0


def great_circle_km(a, b):
    la1, lo1, la2, lo2 = map(math.radians, (a[1], a[2], b[1], b[2]))
    h = math.sin((la2 - la1) / 2) ** 2 + math.cos(la1) * math.cos(la2) * math.sin((lo2 - lo1) / 2) ** 2
    return 2 * EARTH_KM * math.asin(math.sqrt(h))


def main():
    rng = random.Random(7)
    names = [c[0] for c in CITIES]
    with open("cities.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([""] + names)
        for a in CITIES:
            row = [a[0]]
            for b in CITIES:
                if a is b:
                    row.append("0")
                    continue
                one_way = great_circle_km(a, b) / FIBRE_KM_PER_MSEC * INFLATION
                rtt = 2 * one_way + ACCESS_MSEC
                row.append(f"{rtt * rng.uniform(0.95, 1.05):.1f}")
            w.writerow(row)
    with open("weights.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["city", "weight"])
        for name, _, _, weight in CITIES:
            w.writerow([name, weight])


if __name__ == "__main__":
    main()
