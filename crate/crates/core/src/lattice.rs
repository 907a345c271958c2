//! Rank-1 lattice generating vectors built component by component for a
//! weighted Korobov space (smoothness 2, product weights `1/j`), one per
//! prime size, 19 coordinates each.

pub(crate) const LATTICE_DIM: usize = 19;

pub(crate) const LATTICES: [(usize, [u32; LATTICE_DIM]); 10] = [
    (
        251,
        [
            1, 104, 32, 56, 77, 67, 120, 40, 85, 123, 8, 75, 51, 88, 112, 99, 80, 64, 48,
        ],
    ),
    (
        509,
        [
            1, 209, 133, 228, 32, 161, 222, 173, 116, 247, 110, 152, 97, 59, 21, 17, 40, 55, 74,
        ],
    ),
    (
        1021,
        [
            1, 374, 156, 285, 305, 253, 486, 347, 399, 478, 228, 352, 15, 208, 213, 332, 82, 280,
            99,
        ],
    ),
    (
        2039,
        [
            1, 790, 965, 494, 846, 1004, 434, 834, 313, 366, 657, 452, 84, 769, 606, 317, 895, 981,
            1016,
        ],
    ),
    (
        4093,
        [
            1, 1210, 1542, 1785, 424, 2011, 1718, 1807, 387, 1428, 1088, 1026, 1175, 1738, 704,
            1242, 1557, 1051, 139,
        ],
    ),
    (
        8191,
        [
            1, 2431, 3799, 1141, 520, 2865, 1075, 2098, 3405, 2643, 858, 4074, 1986, 2529, 1449,
            4069, 2610, 2201, 1555,
        ],
    ),
    (
        16381,
        [
            1, 6789, 1848, 6013, 495, 1611, 444, 1315, 6933, 5692, 2408, 2817, 3556, 5506, 4711,
            2724, 5341, 8086, 7261,
        ],
    ),
    (
        32749,
        [
            1, 9726, 14974, 8575, 11069, 11438, 2097, 9220, 15832, 9941, 3300, 7066, 13947, 6894,
            897, 4084, 15415, 8878, 5409,
        ],
    ),
    (
        65521,
        [
            1, 24876, 5411, 23459, 24076, 1901, 20159, 22555, 11209, 20250, 29843, 18448, 1320,
            31222, 13943, 3977, 21492, 5683, 20464,
        ],
    ),
    (
        131071,
        [
            1, 57161, 34908, 9421, 7559, 44865, 40101, 63407, 11956, 48682, 52981, 42856, 11073,
            4848, 2634, 54047, 41952, 61522, 58315,
        ],
    ),
];
