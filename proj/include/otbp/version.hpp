#pragma once

#define OTBP_VERSION "0.1.0"
