#pragma once

#define CNLS_VERSION "1.0.0"
