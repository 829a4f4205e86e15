#ifndef SCMS_P256_CORE_H
#define SCMS_P256_CORE_H

#include <stdint.h>

/* Big-endian 32-octet inputs/outputs. k must already be reduced mod n.
 * Returns 1 and fills (ox, oy) with the affine result, or 0 for the identity. */
int p256_scalar_mult(const uint8_t k[32], const uint8_t x[32], const uint8_t y[32],
                     uint8_t ox[32], uint8_t oy[32]);

#endif
