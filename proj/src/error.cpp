#include "uem/error.hpp"
