package com.acme.util;

/**
 * Small formatting helpers.
 */
public class Helper {
    private int seed;

    public Helper(int seed) {
        this.seed = seed;
    }

    public int norm(int x) {
        // keep the sign
        return x < 0 ? -x : x;
    }

    public static String fmt(int value) {
        return "v" + value;
    }

    public static String fmt(String value) {
        return value.trim();
    }
}
